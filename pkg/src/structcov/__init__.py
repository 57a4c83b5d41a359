"""Robust estimation of structured scatter matrices for heavy-tailed data.

Minimizes Tyler's scatter cost under structural constraints
(linear spans, sums of known rank-one atoms, Toeplitz and banded
Toeplitz via circulant embedding, spiked, and Kronecker products) with
majorization-minimization loops, plus a Monte Carlo benchmark harness
and a MUSIC direction-of-arrival pipeline.
"""

from .exceptions import (
    DegenerateDataError,
    DegenerateSpectrumWarning,
    EstimationError,
    FailedToConvergeError,
    InfeasibleConstraintError,
    InvalidInputError,
    NumericalFailureError,
)
from .kronecker import (
    KroneckerFactors,
    ReshapedSamples,
    block_mm_step,
    estimate_kronecker,
    gauss_seidel_step,
    kron_objective,
)
from .linalg import (
    EigenDecomposition,
    chol_pd,
    dft_matrix,
    hermitian_eig,
    pd_geometric_mean,
    pd_sqrt,
)
from .linear import (
    LinearStructure,
    banded_toeplitz_basis,
    circulant_basis,
    diagonal_basis,
    estimate_linear,
    full_symmetric_basis,
    hermitian_basis,
    inner_update,
    stationarity_residual,
    structure_from_name,
    toeplitz_basis,
)
from .rankone import (
    RankOneDictionary,
    estimate_rank_one,
    power_update,
    surrogate_params,
)
from .simulate import (
    MusicResult,
    angles_recovered,
    ar_cov,
    banded_ar_cov,
    default_music_grid,
    doa_cov,
    music_spectrum,
    nmse,
    sample_cov,
    sample_elliptical,
    spiked_cov,
    steering_vector,
    subspace_error,
    ula_dictionary,
)
from .spiked import SpikedModel, estimate_spiked, project_spiked, spiked_inner_update
from .toeplitz import (
    BandedSpec,
    CirculantEmbedding,
    banded_inner_update,
    build_embedding,
    diagonal_spread,
    estimate_banded_toeplitz,
    estimate_toeplitz,
    first_correlations,
)
from .tyler import (
    EstimatorResult,
    MMSettings,
    SampleSet,
    fixed_point_residual,
    mm_drive,
    tyler_cost,
    tyler_unconstrained,
    weighted_scatter,
)
from .bench import ExperimentConfig, run_experiment

__version__ = "0.1.0"

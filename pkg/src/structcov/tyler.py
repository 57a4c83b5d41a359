"""Tyler's scatter cost, the weighted-scatter operator, and the MM driver.

The cost being minimized throughout the package is

    L(R) = log det(R) + (K/N) * sum_i log(x_i^H R^{-1} x_i),

which is scale invariant in R and in each sample, so every estimator
reports a trace-normalized scatter matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import (
    FailedToConvergeError,
    InvalidInputError,
)
from .linalg import as_field_array, chol_pd, hermitize

TERMINATION_CONVERGED = "converged"
TERMINATION_MAX_ITER = "max_iter"


@dataclass(frozen=True)
class SampleSet:
    """N samples of dimension K, one per row.

    Zero samples are rejected at construction: they make the scatter
    cost undefined. The oversampling requirement N > K is only imposed
    by estimators that need it (see :meth:`require_oversampled`);
    Kronecker-structured estimation works with N <= K.
    """

    data: np.ndarray

    @classmethod
    def from_array(cls, data) -> "SampleSet":
        data = as_field_array(data, "samples")
        if data.ndim != 2:
            raise InvalidInputError(f"samples must be a 2-D array, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise InvalidInputError("samples must be non-empty")
        norms = np.linalg.norm(data, axis=1)
        if np.any(norms == 0.0):
            raise InvalidInputError("sample set contains a zero vector")
        return cls(data=data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def k(self) -> int:
        return self.data.shape[1]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.data)

    def require_oversampled(self) -> None:
        if self.n <= self.k:
            raise InvalidInputError(
                f"estimation needs more samples than dimensions (N={self.n}, K={self.k})"
            )

    def to_complex(self) -> "SampleSet":
        if self.is_complex:
            return self
        return SampleSet(data=self.data.astype(np.complex128))


@dataclass(frozen=True)
class MMSettings:
    """Stopping rule for the majorization-minimization loops."""

    tol: float = 1e-8
    max_iter: int = 1000
    record_trace: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidInputError("tol must be positive")
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be at least 1")


@dataclass
class EstimatorResult:
    """Outcome of one estimation run.

    ``scatter`` is trace-normalized (Tr = 1). ``params`` holds the
    structure-specific parameter vector when one exists; ``details``
    carries estimator extras (e.g. Kronecker factors).
    """

    scatter: np.ndarray
    params: np.ndarray | None
    objective_trace: np.ndarray
    iterations: int
    termination: str
    details: dict = field(default_factory=dict)


def _prepare(R, samples: SampleSet):
    R = as_field_array(R, "scatter")
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise InvalidInputError(f"scatter must be square, got shape {R.shape}")
    if R.shape[0] != samples.k:
        raise InvalidInputError(
            f"dimension mismatch: scatter is {R.shape[0]}x{R.shape[0]}, samples have K={samples.k}"
        )
    if samples.is_complex and not np.iscomplexobj(R):
        R = R.astype(np.complex128)
    return R


def _cho_lower(R):
    try:
        return np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        raise InvalidInputError("scatter matrix is not positive definite") from None


def _quad_forms(L_factor, X: np.ndarray) -> np.ndarray:
    """x_i^H R^{-1} x_i for every row x_i of X, given R = L L^H."""
    Z = solve_triangular(L_factor, X.T, lower=True, check_finite=False)
    return np.einsum("ij,ij->j", Z.conj(), Z).real


def tyler_cost(R, samples: SampleSet) -> float:
    """Scatter cost log det(R) + (K/N) * sum_i log(x_i^H R^{-1} x_i).

    Scale invariant: ``tyler_cost(c * R, samples)`` equals
    ``tyler_cost(R, samples)`` for any c > 0.
    """
    R = _prepare(R, samples)
    L = _cho_lower(R)
    logdet = 2.0 * np.sum(np.log(np.diag(L).real))
    q = _quad_forms(L, samples.data)
    if np.any(q <= 0.0):
        raise InvalidInputError("encountered a non-positive quadratic form")
    k, n = samples.k, samples.n
    return float(logdet + (k / n) * np.sum(np.log(q)))


def weighted_scatter(R, samples: SampleSet) -> np.ndarray:
    """Weighted second-moment matrix (K/N) * sum_i x_i x_i^H / (x_i^H R^{-1} x_i)."""
    R = _prepare(R, samples)
    L = _cho_lower(R)
    q = _quad_forms(L, samples.data)
    X = samples.data
    M = (samples.k / samples.n) * ((X.T / q) @ X.conj())
    return hermitize(M)


def _rel_change(new: np.ndarray, old: np.ndarray) -> float:
    denom = np.linalg.norm(old.ravel())
    if denom == 0.0:
        return float(np.linalg.norm(new.ravel()))
    return float(np.linalg.norm((new - old).ravel()) / denom)


def _scale(params, c):
    return params * c


def mm_drive(
    inner,
    samples: SampleSet,
    init_params,
    settings: MMSettings | None = None,
    assemble=None,
    rescale=_scale,
) -> EstimatorResult:
    """Generic majorization-minimization loop shared by the structured estimators.

    Parameters
    ----------
    inner : callable
        ``inner(params, R_t, M_t) -> params`` returning parameters that
        do not increase that structure's surrogate. ``R_t`` is the
        current trace-normalized scatter and ``M_t`` the weighted
        scatter at ``R_t``. Exceptions raised by the callback propagate
        with the iteration index attached as ``exc.mm_iteration``.
    samples : SampleSet
        Data; held fixed for the whole run.
    init_params : ndarray
        Feasible starting parameters (the assembled scatter must be PD).
    assemble : callable, optional
        ``assemble(params) -> scatter``; defaults to the identity, i.e.
        the parameters are the scatter matrix itself.
    rescale : callable or None
        ``rescale(params, c) -> params`` matching a scaling of the
        scatter by ``c``; used to keep parameters consistent with the
        trace-normalized iterate. Pass None to skip parameter rescaling
        (the recorded scatter is normalized regardless).

    Returns
    -------
    EstimatorResult
        Converged when the relative parameter change drops to
        ``settings.tol``; otherwise terminates at ``max_iter``.
    """
    settings = settings or MMSettings()
    if assemble is None:
        assemble = lambda p: p  # noqa: E731 - identity structure

    params = np.asarray(init_params)
    R_raw = assemble(params)
    tr = float(np.trace(R_raw).real)
    if not np.isfinite(tr) or tr <= 0.0:
        raise InvalidInputError("initial parameters give a scatter with non-positive trace")
    c = 1.0 / tr
    if rescale is not None:
        params = rescale(params, c)
    R = assemble(params) if rescale is not None else R_raw * c
    if chol_pd(hermitize(R)) is None:
        raise InvalidInputError("initial scatter is not positive definite")

    objective = []
    if settings.record_trace:
        objective.append(tyler_cost(R, samples))

    iterations = 0
    termination = TERMINATION_MAX_ITER
    for t in range(1, settings.max_iter + 1):
        M = weighted_scatter(R, samples)
        try:
            new_params = np.asarray(inner(params, R, M))
        except Exception as exc:
            exc.mm_iteration = t
            raise
        R_raw = assemble(new_params)
        tr = float(np.trace(R_raw).real)
        if not np.isfinite(tr) or tr <= 0.0:
            raise FailedToConvergeError(
                "iterate lost a usable scale; samples may be degenerate", iteration=t
            )
        c = 1.0 / tr
        if rescale is not None:
            new_params = rescale(new_params, c)
            R_new = assemble(new_params)
        else:
            R_new = R_raw * c
        if chol_pd(hermitize(R_new)) is None:
            raise FailedToConvergeError(
                "iterate lost positive definiteness; samples may be degenerate",
                iteration=t,
            )
        delta = _rel_change(new_params, params)
        params = new_params
        R = R_new
        iterations = t
        if settings.record_trace:
            objective.append(tyler_cost(R, samples))
        if delta <= settings.tol:
            termination = TERMINATION_CONVERGED
            break

    return EstimatorResult(
        scatter=hermitize(R),
        params=params,
        objective_trace=np.asarray(objective, dtype=float),
        iterations=iterations,
        termination=termination,
    )


def tyler_unconstrained(
    samples: SampleSet,
    settings: MMSettings | None = None,
    init=None,
) -> EstimatorResult:
    """Unconstrained Tyler's M-estimator by fixed-point iteration.

    Iterates R <- weighted_scatter(R, X) followed by trace
    normalization, which is a majorization-minimization scheme for the
    scatter cost and therefore descends monotonically.

    Parameters
    ----------
    samples : SampleSet
        Needs N > K and samples in general position.
    init : ndarray, optional
        Positive definite starting matrix; defaults to I/K. The fixed
        point is unique up to scale, so the result does not depend on
        this choice.
    """
    samples.require_oversampled()
    if init is None:
        init = np.eye(samples.k) / samples.k
    init = _prepare(init, samples)
    result = mm_drive(
        inner=lambda params, R, M: M,
        samples=samples,
        init_params=init,
        settings=settings,
    )
    result.params = None
    return result


def fixed_point_residual(R, samples: SampleSet) -> float:
    """Relative residual || R - Phi(R) ||_F / ||R||_F of the defining fixed point.

    ``Phi`` is the weighted scatter followed by trace normalization.
    """
    R = _prepare(R, samples)
    M = weighted_scatter(R, samples)
    M = M / np.trace(M).real
    Rn = R / np.trace(R).real
    return float(np.linalg.norm(Rn - M) / np.linalg.norm(Rn))

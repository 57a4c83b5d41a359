"""Scatter estimation for R = A diag(p) A^H with a known dictionary A.

The MM surrogate separates over the nonnegative powers p, so each outer
iteration has the closed-form update p_j = sqrt(d_j / w_j) with

    w = diag(A^H R_t^{-1} A),
    d = diag(P_t A^H R_t^{-1} M_t R_t^{-1} A P_t).

An optional small ridge ``epsilon`` replaces diag(p) by diag(p) + eps*I
inside R, which keeps every iterate strictly positive definite; the
estimate is practically unchanged for tiny eps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .exceptions import (
    FailedToConvergeError,
    InvalidInputError,
    NumericalFailureError,
)
from .linalg import as_field_array, hermitize
from .tyler import EstimatorResult, MMSettings, SampleSet, mm_drive, weighted_scatter

_EPS_RESTART = 1e-10


@dataclass(frozen=True)
class RankOneDictionary:
    """K x L matrix of atoms a_j; the scatter model is sum_j p_j a_j a_j^H.

    For the noise-free model the dictionary must be overcomplete (L > K)
    with every K columns linearly independent, which is checked on a few
    random column subsets. Dictionaries built with :meth:`augmented`
    carry appended identity columns and satisfy the requirement by
    construction, so the check is skipped.
    """

    atoms: np.ndarray
    augmented: bool = False

    def __post_init__(self):
        atoms = as_field_array(self.atoms, "dictionary")
        if atoms.ndim != 2:
            raise InvalidInputError("dictionary must be a 2-D array of atom columns")
        if np.any(np.linalg.norm(atoms, axis=0) == 0.0):
            raise InvalidInputError("dictionary contains a zero atom")
        object.__setattr__(self, "atoms", atoms)
        if not self.augmented:
            self._check_spark()

    def _check_spark(self, subsets: int = 8):
        k, l = self.atoms.shape
        if l <= k:
            raise InvalidInputError(
                f"noise-free dictionaries need more atoms than dimensions (K={k}, L={l}); "
                "augment with identity columns for a noisy model"
            )
        rng = np.random.default_rng(20160714)
        for _ in range(subsets):
            cols = rng.choice(l, size=k, replace=False)
            if np.linalg.matrix_rank(self.atoms[:, cols]) < k:
                raise InvalidInputError(
                    "a random subset of K atoms is linearly dependent"
                )

    @classmethod
    def augment(cls, atoms) -> "RankOneDictionary":
        """Append identity columns, modelling independent per-coordinate noise."""
        atoms = as_field_array(atoms, "dictionary")
        if atoms.ndim != 2:
            raise InvalidInputError("dictionary must be a 2-D array of atom columns")
        k = atoms.shape[0]
        eye = np.eye(k, dtype=atoms.dtype)
        return cls(atoms=np.concatenate([atoms, eye], axis=1), augmented=True)

    @property
    def k(self) -> int:
        return self.atoms.shape[0]

    @property
    def l(self) -> int:
        return self.atoms.shape[1]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.atoms)

    def assemble(self, powers, epsilon: float = 0.0) -> np.ndarray:
        p = np.asarray(powers, dtype=float) + epsilon
        A = self.atoms
        return hermitize((A * p) @ A.conj().T)


def check_powers(p, l: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (l,):
        raise InvalidInputError(f"power vector must have length {l}")
    if np.any(p < 0.0):
        raise InvalidInputError("powers must be nonnegative")
    if not np.any(p > 0.0):
        raise InvalidInputError("powers must not all be zero")
    return p


def _weights(dictionary: RankOneDictionary, p_eff, R_t, M_t):
    """(w, d) of the separable surrogate, given effective powers and R_t, M_t."""
    A = dictionary.atoms
    try:
        factor = cho_factor(R_t, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise NumericalFailureError(
            "iterate scatter is singular; the dictionary may violate its rank condition"
        ) from None
    G = cho_solve(factor, A, check_finite=False)          # R_t^{-1} A
    w = np.einsum("ij,ij->j", A.conj(), G).real
    Y = cho_solve(factor, M_t @ G, check_finite=False)    # R_t^{-1} M_t R_t^{-1} A
    d = (p_eff ** 2) * np.einsum("ij,ij->j", A.conj(), Y).real
    return w, np.maximum(d, 0.0)


def surrogate_params(dictionary: RankOneDictionary, p_t, samples: SampleSet):
    """Quantities of one MM step at powers ``p_t``: (R_t, M_t, w_t, d_t).

    R_t = A diag(p_t) A^H must be positive definite, which holds when
    p_t > 0 and the dictionary satisfies its rank condition; a singular
    R_t raises NumericalFailureError.
    """
    p_t = check_powers(p_t, dictionary.l)
    R_t = dictionary.assemble(p_t)
    try:
        M_t = weighted_scatter(R_t, samples)
    except InvalidInputError as exc:
        raise NumericalFailureError(
            "iterate scatter is singular; the dictionary may violate its rank condition"
        ) from exc
    w, d = _weights(dictionary, p_t, R_t, M_t)
    return R_t, M_t, w, d


def power_update(w_t, d_t) -> np.ndarray:
    """Closed-form surrogate minimizer p_j = sqrt(d_j / w_j), with 0 at d_j = 0."""
    w = np.asarray(w_t, dtype=float)
    d = np.asarray(d_t, dtype=float)
    if np.any(w <= 0.0):
        raise InvalidInputError("surrogate weights w must be positive")
    if np.any(d < 0.0):
        raise InvalidInputError("surrogate weights d must be nonnegative")
    return np.sqrt(d / w)


def _match_field(dictionary: RankOneDictionary, samples: SampleSet) -> SampleSet:
    if dictionary.is_complex and not samples.is_complex:
        return samples.to_complex()
    if samples.is_complex and not dictionary.is_complex:
        raise InvalidInputError("complex samples require a complex dictionary")
    return samples


def estimate_rank_one(
    dictionary: RankOneDictionary,
    samples: SampleSet,
    settings: MMSettings | None = None,
    epsilon: float = 0.0,
    init_powers=None,
) -> EstimatorResult:
    """Tyler-type scatter estimation over R = A diag(p) A^H, p >= 0.

    Parameters
    ----------
    epsilon : float
        Optional ridge added to every power inside the model (default 0).
        If an iterate loses positive definiteness with epsilon = 0, the
        run restarts once with epsilon = 1e-10.
    init_powers : ndarray, optional
        Strictly positive starting powers; defaults to all ones. The
        final scatter is empirically insensitive to this choice.

    Returns
    -------
    EstimatorResult
        ``params`` holds the power vector of the returned trace-one
        scatter; ``details['epsilon']`` records the ridge actually used.
    """
    if epsilon < 0.0:
        raise InvalidInputError("epsilon must be nonnegative")
    samples = _match_field(dictionary, samples)
    samples.require_oversampled()
    if dictionary.k != samples.k:
        raise InvalidInputError(
            f"dictionary dimension {dictionary.k} does not match samples K={samples.k}"
        )
    if init_powers is None:
        init_powers = np.ones(dictionary.l)
    else:
        init_powers = check_powers(init_powers, dictionary.l)

    try:
        return _run(dictionary, samples, settings, epsilon, init_powers)
    except FailedToConvergeError:
        if epsilon > 0.0:
            raise
        return _run(dictionary, samples, settings, _EPS_RESTART, init_powers)


def _run(dictionary, samples, settings, epsilon, init_powers) -> EstimatorResult:
    def inner(p, R, M):
        p_eff = np.asarray(p, dtype=float) + epsilon
        w, d = _weights(dictionary, p_eff, R, M)
        p_new_eff = np.maximum(power_update(w, d), epsilon)
        p_new = p_new_eff - epsilon
        if not np.any(p_new > 0.0):
            raise FailedToConvergeError("all powers collapsed to zero")
        return p_new

    if epsilon == 0.0:
        rescale = lambda p, c: p * c  # noqa: E731
    else:
        rescale = lambda p, c: np.maximum((p + epsilon) * c - epsilon, 0.0)  # noqa: E731

    result = mm_drive(
        inner=inner,
        samples=samples,
        init_params=init_powers,
        settings=settings,
        assemble=lambda p: dictionary.assemble(p, epsilon),
        rescale=rescale,
    )
    result.details["epsilon"] = epsilon
    return result

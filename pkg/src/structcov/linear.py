"""Scatter estimation under a general linear structure R = sum_j a_j B_j >= 0.

The MM outer loop repeatedly minimizes the convex surrogate

    f(a) = Tr(R_t^{-1} R(a)) + Tr(M_t R(a)^{-1})

over the coefficient vector, which is done by a damped Newton method
with a Cholesky feasibility line search. The second term blows up at
the boundary of the positive definite cone whenever M_t is positive
definite, so the iterates stay strictly feasible without an explicit
inequality handler; a tiny log-det barrier is added only in the
degenerate case of singular M_t.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .exceptions import InvalidInputError, NumericalFailureError
from .linalg import as_field_array, check_hermitian, chol_pd, hermitize
from .tyler import EstimatorResult, MMSettings, SampleSet, mm_drive, weighted_scatter

_NEWTON_GRAD_TOL = 1e-8
_NEWTON_MAX_ITER = 120
_MAX_HALVINGS = 60


@dataclass(frozen=True)
class LinearStructure:
    """A linear family of Hermitian matrices spanned by a fixed basis.

    Parameters
    ----------
    basis : ndarray, shape (L, K, K)
        Hermitian basis matrices. Must be linearly independent.
    init_coeffs : ndarray, shape (L,), optional
        Coefficients of a positive definite member, used as the default
        starting point. When omitted, the projection of the identity
        onto the span is used (and must be positive definite).
    """

    basis: np.ndarray
    init_coeffs: np.ndarray = None

    def __post_init__(self):
        basis = as_field_array(self.basis, "basis")
        if basis.ndim != 3 or basis.shape[1] != basis.shape[2]:
            raise InvalidInputError("basis must be an (L, K, K) array")
        for j in range(basis.shape[0]):
            check_hermitian(basis[j], f"basis matrix {j}")
        vecs = basis.reshape(basis.shape[0], -1)
        gram = (vecs @ vecs.conj().T).real
        sv = np.linalg.svd(gram, compute_uv=False)
        if sv[-1] <= 1e-10 * sv[0]:
            raise InvalidInputError("basis matrices are not linearly independent")
        object.__setattr__(self, "basis", basis)

        if self.init_coeffs is None:
            target = np.eye(basis.shape[1], dtype=basis.dtype).reshape(-1)
            coeffs = np.linalg.solve(gram, (vecs.conj() @ target).real)
        else:
            coeffs = np.asarray(self.init_coeffs, dtype=float)
            if coeffs.shape != (basis.shape[0],):
                raise InvalidInputError("init_coeffs length must match the basis size")
        object.__setattr__(self, "init_coeffs", coeffs)
        if chol_pd(hermitize(self.assemble(coeffs))) is None:
            raise InvalidInputError("initial coefficients do not give a positive definite matrix")

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def size(self) -> int:
        return self.basis.shape[0]

    def assemble(self, coeffs) -> np.ndarray:
        return np.einsum("l,lij->ij", np.asarray(coeffs, dtype=float), self.basis)


# ---------------------------------------------------------------------------
# structure presets
# ---------------------------------------------------------------------------

def toeplitz_basis(k: int) -> LinearStructure:
    """Symmetric Toeplitz family: one indicator basis matrix per diagonal offset."""
    basis = [np.eye(k)]
    for m in range(1, k):
        basis.append(np.eye(k, k=m) + np.eye(k, k=-m))
    return LinearStructure(basis=np.stack(basis))


def banded_toeplitz_basis(k: int, bandwidth: int) -> LinearStructure:
    """Symmetric Toeplitz matrices with correlations zero beyond ``bandwidth``."""
    if not 0 <= bandwidth <= k - 1:
        raise InvalidInputError("bandwidth must lie in [0, K-1]")
    basis = [np.eye(k)]
    for m in range(1, bandwidth + 1):
        basis.append(np.eye(k, k=m) + np.eye(k, k=-m))
    return LinearStructure(basis=np.stack(basis))


def circulant_basis(k: int) -> LinearStructure:
    """Symmetric circulant family (offsets identified modulo K)."""
    basis = [np.eye(k)]
    for m in range(1, k // 2 + 1):
        B = np.eye(k, k=m) + np.eye(k, k=-m) + np.eye(k, k=m - k) + np.eye(k, k=k - m)
        if 2 * m == k:
            B = B / 2.0
        basis.append(B)
    return LinearStructure(basis=np.stack(basis))


def diagonal_basis(k: int) -> LinearStructure:
    """Diagonal matrices."""
    basis = np.zeros((k, k, k))
    for i in range(k):
        basis[i, i, i] = 1.0
    return LinearStructure(basis=basis)


def full_symmetric_basis(k: int) -> LinearStructure:
    """All real symmetric matrices (a vacuous structural constraint)."""
    mats = []
    for i in range(k):
        B = np.zeros((k, k))
        B[i, i] = 1.0
        mats.append(B)
    for i in range(k):
        for j in range(i + 1, k):
            B = np.zeros((k, k))
            B[i, j] = B[j, i] = 1.0
            mats.append(B)
    return LinearStructure(basis=np.stack(mats))


def hermitian_basis(k: int) -> LinearStructure:
    """All complex Hermitian matrices with real coefficients."""
    mats = []
    for i in range(k):
        B = np.zeros((k, k), dtype=complex)
        B[i, i] = 1.0
        mats.append(B)
    for i in range(k):
        for j in range(i + 1, k):
            B = np.zeros((k, k), dtype=complex)
            B[i, j] = B[j, i] = 1.0
            mats.append(B)
            C = np.zeros((k, k), dtype=complex)
            C[i, j] = 1.0j
            C[j, i] = -1.0j
            mats.append(C)
    return LinearStructure(basis=np.stack(mats))


def structure_from_name(name: str, k: int) -> LinearStructure:
    """Resolve a preset by CLI name: toeplitz, banded:<k>, diagonal, full, circulant."""
    if name == "toeplitz":
        return toeplitz_basis(k)
    if name == "diagonal":
        return diagonal_basis(k)
    if name == "full":
        return full_symmetric_basis(k)
    if name == "circulant":
        return circulant_basis(k)
    if name.startswith("banded:"):
        try:
            bandwidth = int(name.split(":", 1)[1])
        except ValueError:
            raise InvalidInputError(f"bad banded structure spec {name!r}") from None
        return banded_toeplitz_basis(k, bandwidth)
    raise InvalidInputError(f"unknown structure preset {name!r}")


# ---------------------------------------------------------------------------
# inner convex solve
# ---------------------------------------------------------------------------

def _surrogate_pieces(struct: LinearStructure, coeffs, Wt, M, mu: float):
    """Value, gradient and Hessian of the surrogate at ``coeffs``.

    Wt is the inverse of the outer iterate R_t; ``mu`` adds a -mu*logdet
    barrier used only when M is singular. Returns None when the point is
    infeasible.
    """
    R = hermitize(struct.assemble(coeffs))
    try:
        factor = cho_factor(R, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return None
    W = cho_solve(factor, np.eye(R.shape[0], dtype=R.dtype), check_finite=False)
    lin = np.einsum("ij,lji->l", Wt, struct.basis).real
    WMW = W @ M @ W
    value = float((Wt * R.conj()).sum().real + (M * W.conj()).sum().real)
    grad = lin - np.einsum("ij,lji->l", WMW, struct.basis).real
    # P_l = W B_l ; H_{lm} = 2 Re Tr(W M P_l P_m)
    P = np.einsum("ij,ljk->lik", W, struct.basis)
    WM = W @ M
    H = 2.0 * np.einsum("ab,lbc,mca->lm", WM, P, P).real
    if mu > 0.0:
        logdet = 2.0 * np.sum(np.log(np.diag(factor[0]).real))
        value -= mu * logdet
        grad -= mu * np.einsum("ij,lji->l", W, struct.basis).real
        H += mu * np.einsum("lab,mba->lm", P, P).real
    return value, grad, H


def _surrogate_value(struct: LinearStructure, coeffs, Wt, M, mu: float):
    R = hermitize(struct.assemble(coeffs))
    L = chol_pd(R)
    if L is None:
        return None
    W = cho_solve((L, True), np.eye(R.shape[0], dtype=R.dtype), check_finite=False)
    value = float((Wt * R.conj()).sum().real + (M * W.conj()).sum().real)
    if mu > 0.0:
        value -= mu * 2.0 * np.sum(np.log(np.diag(L).real))
    return value


def _newton_minimize(struct, coeffs, Wt, M, mu, grad_tol=_NEWTON_GRAD_TOL):
    coeffs = np.asarray(coeffs, dtype=float).copy()
    pieces = _surrogate_pieces(struct, coeffs, Wt, M, mu)
    if pieces is None:
        raise InvalidInputError("inner solve started from an infeasible point")
    value, grad, H = pieces
    for _ in range(_NEWTON_MAX_ITER):
        if np.linalg.norm(grad) <= grad_tol * (1.0 + abs(value)):
            return coeffs, value, grad
        damping = 0.0
        scale = np.trace(H) / H.shape[0]
        while True:
            try:
                step = np.linalg.solve(H + damping * np.eye(H.shape[0]), -grad)
                break
            except np.linalg.LinAlgError:
                damping = max(2.0 * damping, 1e-12 * scale)
        slope = float(grad @ step)
        if slope >= 0.0:  # damped direction lost descent; fall back to gradient
            step = -grad
            slope = -float(grad @ grad)
        # roundoff slack: near the optimum the Armijo decrease sits below
        # the evaluation noise of the value itself
        slack = 1e-12 * (1.0 + abs(value))
        t = 1.0
        for _ in range(_MAX_HALVINGS):
            trial = coeffs + t * step
            trial_value = _surrogate_value(struct, trial, Wt, M, mu)
            if trial_value is not None and trial_value <= value + 1e-4 * t * slope + slack:
                break
            t *= 0.5
        else:
            raise NumericalFailureError(
                "line search failed in the structured inner solve",
                gradient_norm=float(np.linalg.norm(grad)),
                value=value,
            )
        coeffs = coeffs + t * step
        value, grad, H = _surrogate_pieces(struct, coeffs, Wt, M, mu)
    raise NumericalFailureError(
        "inner Newton solve did not reach its gradient tolerance",
        gradient_norm=float(np.linalg.norm(grad)),
        value=value,
    )


def surrogate_gradient(struct: LinearStructure, coeffs, R_t, M) -> np.ndarray:
    """Gradient of f(a) = Tr(R_t^{-1} R(a)) + Tr(M R(a)^{-1}) at ``coeffs``."""
    R_t = check_hermitian(R_t, "R_t")
    Wt = np.linalg.inv(R_t)
    R = hermitize(struct.assemble(coeffs))
    W = np.linalg.inv(R)
    WMW = W @ np.asarray(M) @ W
    lin = np.einsum("ij,lji->l", Wt, struct.basis).real
    return lin - np.einsum("ij,lji->l", WMW, struct.basis).real


def surrogate_hessian(struct: LinearStructure, coeffs, M) -> np.ndarray:
    """Hessian of the Tr(M R(a)^{-1}) term (the linear term contributes nothing)."""
    R = hermitize(struct.assemble(coeffs))
    W = np.linalg.inv(R)
    P = np.einsum("ij,ljk->lik", W, struct.basis)
    WM = W @ np.asarray(M)
    return 2.0 * np.einsum("ab,lbc,mca->lm", WM, P, P).real


def surrogate_value(struct: LinearStructure, coeffs, R_t, M) -> float:
    """f(a) = Tr(R_t^{-1} R(a)) + Tr(M R(a)^{-1})."""
    Wt = np.linalg.inv(check_hermitian(R_t, "R_t"))
    value = _surrogate_value(struct, coeffs, Wt, np.asarray(M), 0.0)
    if value is None:
        raise InvalidInputError("coefficients are infeasible")
    return value


def inner_update(struct: LinearStructure, coeffs, R_t, M_t) -> np.ndarray:
    """Minimize the MM surrogate over the structure's coefficients.

    Starts from ``coeffs`` (warm start) and returns coefficients with
    surrogate gradient norm at most 1e-8 * (1 + |f|) and R(a) > 0.
    A -mu*logdet safeguard with mu = 1e-10 * Tr(M_t) is applied when
    M_t is singular, followed by an unbarriered polish.
    """
    R_t = check_hermitian(R_t, "R_t")
    M_t = check_hermitian(M_t, "M_t")
    factor = cho_factor(R_t, lower=True, check_finite=False)
    Wt = cho_solve(factor, np.eye(R_t.shape[0], dtype=R_t.dtype), check_finite=False)

    eigs = np.linalg.eigvalsh(M_t)
    trace_m = float(np.trace(M_t).real)
    mu = 0.0
    if eigs[0] <= 1e-12 * max(trace_m / M_t.shape[0], np.finfo(float).tiny):
        mu = 1e-10 * trace_m
    solution, _, _ = _newton_minimize(struct, coeffs, Wt, M_t, mu)
    if mu > 0.0:
        try:
            solution, _, _ = _newton_minimize(struct, solution, Wt, M_t, 0.0)
        except NumericalFailureError:
            pass  # keep the barrier solution; the polish is best-effort
    return solution


def estimate_linear(
    struct: LinearStructure,
    samples: SampleSet,
    settings: MMSettings | None = None,
    init_coeffs=None,
) -> EstimatorResult:
    """Tyler-type scatter estimation constrained to a linear structure.

    Runs the MM loop with :func:`inner_update` as the surrogate
    minimizer. Every iterate lies in the span of the basis, is positive
    definite, and has unit trace; the objective trace is non-increasing.
    """
    samples.require_oversampled()
    if struct.dim != samples.k:
        raise InvalidInputError(
            f"structure dimension {struct.dim} does not match samples K={samples.k}"
        )
    coeffs = np.asarray(init_coeffs, dtype=float) if init_coeffs is not None else struct.init_coeffs
    if chol_pd(hermitize(struct.assemble(coeffs))) is None:
        raise InvalidInputError("initial coefficients are infeasible")
    return mm_drive(
        inner=lambda a, R, M: inner_update(struct, a, R, M),
        samples=samples,
        init_params=coeffs,
        settings=settings,
        assemble=struct.assemble,
    )


def stationarity_residual(struct: LinearStructure, scatter, samples: SampleSet) -> float:
    """Sup-norm of the cost gradient projected on the structure's coefficients.

    At a stationary point of the constrained problem the partial
    derivatives Tr(R^{-1} B_j) - Tr(R^{-1} M R^{-1} B_j) vanish; the
    residual is normalized by the scale of the first term.
    """
    R = check_hermitian(scatter, "scatter")
    M = weighted_scatter(R, samples)
    W = np.linalg.inv(R)
    WMW = W @ M @ W
    lin = np.einsum("ij,lji->l", W, struct.basis).real
    grad = lin - np.einsum("ij,lji->l", WMW, struct.basis).real
    return float(np.max(np.abs(grad)) / (1.0 + np.max(np.abs(lin))))

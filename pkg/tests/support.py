"""Shared helpers and independent oracles used across the test suite.

The oracles here deliberately avoid the library's solver paths: they
evaluate objectives from their definitions (explicit inverses, naive
loops) and optimize by generic means (coordinate descent, null-space
barrier Newton, random search).
"""

import numpy as np
import scipy.linalg

from structcov import sample_elliptical


def rand_hermitian(k, rng, complex_=False):
    if complex_:
        A = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    else:
        A = rng.standard_normal((k, k))
    return 0.5 * (A + A.conj().T)


def rand_pd(k, rng, complex_=False, ridge=None):
    if complex_:
        A = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    else:
        A = rng.standard_normal((k, k))
    M = A @ A.conj().T + (ridge if ridge is not None else 0.5 * k) * np.eye(k)
    return 0.5 * (M + M.conj().T)


def heavy_samples(R0, n, seed):
    return sample_elliptical(R0, n, seed)


def nonincreasing(trace, slack=1e-10):
    trace = np.asarray(trace)
    return bool(np.all(np.diff(trace) <= slack))


# ---------------------------------------------------------------------------
# definition-level objective evaluations
# ---------------------------------------------------------------------------

def tyler_cost_naive(R, X):
    """log det R + (K/N) sum log(x^H R^{-1} x) via eigenvalues and explicit solves."""
    n, k = X.shape
    eigvals = np.linalg.eigvalsh(R)
    logdet = float(np.sum(np.log(eigvals)))
    Rinv = np.linalg.inv(R)
    total = 0.0
    for i in range(n):
        x = X[i]
        total += np.log(np.real(x.conj() @ Rinv @ x))
    return logdet + (k / n) * total


def weighted_scatter_naive(R, X):
    n, k = X.shape
    Rinv = np.linalg.inv(R)
    M = np.zeros((k, k), dtype=complex if np.iscomplexobj(X) else float)
    for i in range(n):
        x = X[i]
        q = np.real(x.conj() @ Rinv @ x)
        M += np.outer(x, x.conj()) / q
    return (k / n) * M


def linear_surrogate_naive(struct, coeffs, R_t, M):
    """f(a) = Tr(R_t^{-1} R(a)) + Tr(M R(a)^{-1}), or inf outside the PD cone."""
    R = struct.assemble(coeffs)
    R = 0.5 * (R + R.conj().T)
    eig = np.linalg.eigvalsh(R)
    if eig[0] <= 0:
        return np.inf
    Rt_inv = np.linalg.inv(R_t)
    return float(np.real(np.trace(Rt_inv @ R) + np.trace(M @ np.linalg.inv(R))))


# ---------------------------------------------------------------------------
# independent optimizers
# ---------------------------------------------------------------------------

def coordinate_descent_linear(struct, coeffs, R_t, M, grad_tol=1e-10, max_sweeps=4000):
    """Cyclic exact 1-D minimization of the linear-structure surrogate.

    Uses only function evaluations (scipy's scalar minimizer on a
    feasibility-probed bracket) plus a central-difference gradient for
    the stopping rule.
    """
    from scipy.optimize import minimize_scalar

    a = np.asarray(coeffs, dtype=float).copy()
    L = a.size

    def value(v):
        return linear_surrogate_naive(struct, v, R_t, M)

    def num_grad(v, h=1e-6):
        g = np.zeros(L)
        for j in range(L):
            e = np.zeros(L)
            e[j] = h
            g[j] = (value(v + e) - value(v - e)) / (2 * h)
        return g

    for _ in range(max_sweeps):
        for j in range(L):
            def f1(t, j=j):
                trial = a.copy()
                trial[j] = t
                return value(trial)

            # probe a feasible bracket around the current coordinate
            lo, hi = a[j], a[j]
            step = 0.5 * (1.0 + abs(a[j]))
            while np.isfinite(f1(lo - step)) and step < 1e6:
                lo -= step
                step *= 2.0
            step = 0.5 * (1.0 + abs(a[j]))
            while np.isfinite(f1(hi + step)) and step < 1e6:
                hi += step
                step *= 2.0
            res = minimize_scalar(f1, bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-14})
            if res.fun < f1(a[j]):
                a[j] = res.x
        if np.linalg.norm(num_grad(a)) <= grad_tol * (1.0 + abs(value(a))):
            break
    return a


def barrier_equality_solve(A, w, d, x0, mu_final=1e-10):
    """Interior-point oracle: minimize w@p + sum(d/p) s.t. A p = 0, p > 0.

    Null-space parametrization p = x0 + Z y with a path-following
    log-barrier -mu*sum(log p); plain Newton in y per barrier stage.
    Requires d > 0 and a strictly feasible x0.
    """
    w = np.asarray(w, dtype=float)
    d = np.asarray(d, dtype=float)
    A = np.asarray(A, dtype=float)
    assert np.all(d > 0)
    if A.size == 0:
        Z = np.eye(w.size)
    else:
        Z = scipy.linalg.null_space(A)
        assert np.linalg.norm(A @ x0) <= 1e-10
    assert np.all(x0 > 0)

    y = np.zeros(Z.shape[1])

    def p_of(yv):
        return x0 + Z @ yv

    mu = 1.0
    while True:
        for _ in range(200):
            p = p_of(y)
            grad_p = w - d / p ** 2 - mu / p
            hess_p = 2.0 * d / p ** 3 + mu / p ** 2
            g = Z.T @ grad_p
            H = (Z.T * hess_p) @ Z
            if np.linalg.norm(g) <= 1e-12 * (1.0 + abs(w @ p + np.sum(d / p))):
                break
            step = np.linalg.solve(H, -g)
            t = 1.0
            val = w @ p + np.sum(d / p) - mu * np.sum(np.log(p))
            for _ in range(80):
                p_try = p_of(y + t * step)
                if np.all(p_try > 0):
                    val_try = (w @ p_try + np.sum(d / p_try)
                               - mu * np.sum(np.log(p_try)))
                    if val_try <= val + 1e-12 * (1 + abs(val)):
                        break
                t *= 0.5
            y = y + t * step
        if mu <= mu_final:
            return p_of(y)
        mu = max(mu * 0.1, mu_final)


def spiked_objective(R, M):
    """log det R + Tr(R^{-1} M) from the definitions."""
    eig = np.linalg.eigvalsh(R)
    if eig[0] <= 0:
        return np.inf
    return float(np.sum(np.log(eig)) + np.real(np.trace(np.linalg.solve(R, M))))

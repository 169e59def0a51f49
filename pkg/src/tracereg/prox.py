"""Singular value calculus: SVD triples, nuclear prox, dual gauge.

The weighted nuclear norm ||W1 B W2||_* has proximal and subdifferential
structure inherited from the plain nuclear norm through the maps
M -> W1 M W2; the helpers here keep that calculus in one place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import unvec


@dataclass(frozen=True)
class SvdTriple:
    """Thin SVD restricted to strictly positive singular values.

    U has orthonormal columns (p x r), sigma is nonincreasing and positive,
    V has orthonormal columns (q x r). U_full / V_full are the complete
    orthogonal bases, populated only when the decomposition was requested
    with full=True.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    U_full: np.ndarray | None = None
    V_full: np.ndarray | None = None

    @property
    def rank(self):
        return self.sigma.size


def svd(m, full=False, rtol=None):
    """SVD of m as an SvdTriple; rank cut at rtol * sigma_max.

    rtol defaults to max(p, q) * machine eps, the usual numerical-rank
    tolerance. A zero matrix yields rank 0 with empty thin factors.
    """
    m = np.asarray(m, dtype=float)
    p, q = m.shape
    U, s, Vt = np.linalg.svd(m, full_matrices=full)
    if rtol is None:
        rtol = max(p, q) * np.finfo(float).eps
    cut = rtol * s[0] if s.size and s[0] > 0 else 0.0
    r = int(np.sum(s > cut))
    return SvdTriple(
        U=U[:, :r].copy(), sigma=s[:r].copy(), V=Vt[:r].T.copy(),
        U_full=U if full else None,
        V_full=Vt.T if full else None,
    )


def nuclear_norm(m):
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def spectral_norm(m):
    s = np.linalg.svd(m, compute_uv=False)
    return float(s[0]) if s.size else 0.0


def prox_nuclear(m, t):
    """prox of t * ||.||_* at m: soft-threshold the singular values.

    Returns U diag((sigma - t)_+) V^T. t = 0 returns m unchanged.
    """
    if t < 0:
        raise ValueError(f"threshold t must be nonnegative, got {t}")
    m = np.asarray(m, dtype=float)
    if t == 0:
        return m.copy()
    U, s, Vt = np.linalg.svd(m, full_matrices=False)
    s = np.maximum(s - t, 0.0)
    keep = s > 0
    return (U[:, keep] * s[keep]) @ Vt[keep] if np.any(keep) else np.zeros_like(m)


def dual_feasibility_gauge(theta, problem, weights):
    """||W1^{-1} (sum_i theta_i X_i) W2^{-1}||_2, the dual constraint gauge.

    Values <= 1 are dual feasible; at an exact solution with a nonzero
    penalty term the gauge equals 1.
    """
    s = unvec(problem.stacked.T @ np.asarray(theta, dtype=float), problem.p, problem.q)
    return spectral_norm(weights.W1inv @ s @ weights.W2inv)


def subdifferential_residual(b, g, weights, rtol=None):
    """Distance of g from the subdifferential of ||W1 . W2||_* at b.

    The subdifferential is {W1 (U_r V_r^T + N) W2} over N with
    ||N||_2 <= 1, U_r^T N = 0, N V_r = 0, where U_r, V_r come from the thin
    SVD of W1 b W2. Solving g = W1 (U_r V_r^T + N) W2 for N and measuring
    the violated constraints gives

        max(||U_r^T N||_F, ||N V_r||_F, (||N||_2 - 1)_+),

    which is zero exactly when g is a valid subgradient.
    """
    a = weights.W1 @ b @ weights.W2
    t = svd(a, rtol=rtol)
    n_mat = weights.W1inv @ g @ weights.W2inv
    if t.rank:
        n_mat = n_mat - t.U @ t.V.T
        res_u = np.linalg.norm(t.U.T @ n_mat)
        res_v = np.linalg.norm(n_mat @ t.V)
    else:
        res_u = res_v = 0.0
    res_norm = max(0.0, spectral_norm(n_mat) - 1.0)
    return float(max(res_u, res_v, res_norm))

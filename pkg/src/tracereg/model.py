"""Problem containers, least-squares estimate, adaptive weights, lambda_max.

The model is y_i = <X_i, B> + eps_i with matrix covariates X_i in R^{p x q}.
Throughout, vec() stacks columns, so entry (a, b) of a p x q matrix lands at
position b * p + a of the vectorized form, and (W2 kron W1) vec(B) =
vec(W1 B W2).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

# smallest/largest singular value ratio below which the stacked design is
# treated as row-rank deficient (screening disabled, solver still fine)
ROW_RANK_RTOL = 1e-10

# relative floor applied to padded singular values before the -gamma power
SV_FLOOR_RTOL = 1e-8


def vec(m):
    """Column-stacking vectorization of a matrix."""
    return np.asarray(m).reshape(-1, order="F")


def unvec(v, p, q):
    """Inverse of vec for a p x q matrix."""
    return np.asarray(v).reshape((p, q), order="F")


@dataclass(frozen=True)
class TraceRegressionProblem:
    """Immutable bundle of design matrices, responses and the stacked design.

    stacked has shape (n, p*q) with row i equal to vec(X_i), so the linear
    map B -> (<X_i, B>)_i is stacked @ vec(B).
    """

    n: int
    p: int
    q: int
    X: np.ndarray          # (n, p, q)
    y: np.ndarray          # (n,)
    stacked: np.ndarray    # (n, p*q)
    full_row_rank: bool
    sv_ratio: float        # smallest/largest singular value of stacked


def build_problem(X, y):
    """Validate inputs and assemble a TraceRegressionProblem.

    X may be a list of p x q arrays or an (n, p, q) array. Emits a warning
    (and sets full_row_rank=False) when the stacked design fails the
    row-rank conditioning test; screening requires full row rank but the
    solver does not.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 3:
        raise ValueError(f"X must be n stacked p x q matrices, got shape {X.shape}")
    n, p, q = X.shape
    if y.shape[0] != n:
        raise ValueError(f"y has {y.shape[0]} entries but X has {n} matrices")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite entries")
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains non-finite entries")

    # row i of the stacked design is vec(X_i); transpose gives Fortran order
    stacked = X.transpose(0, 2, 1).reshape(n, p * q)

    sv = np.linalg.svd(stacked, compute_uv=False)
    sv_ratio = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
    full_row_rank = n <= p * q and sv.size == n and sv_ratio > ROW_RANK_RTOL
    if not full_row_rank:
        warnings.warn(
            "stacked design is not numerically full row rank "
            f"(sv ratio {sv_ratio:.3e}); screening is disabled",
            stacklevel=2,
        )

    return TraceRegressionProblem(
        n=n, p=p, q=q, X=X, y=y, stacked=stacked,
        full_row_rank=full_row_rank, sv_ratio=sv_ratio,
    )


class GramFactor:
    """Cholesky factorization of the n x n Gram matrix stacked @ stacked.T.

    Shared by the least-squares estimate, the screening rule and the
    solution path so the factorization happens once per problem.
    """

    def __init__(self, problem):
        self.problem = problem
        gram = problem.stacked @ problem.stacked.T
        try:
            self._cho = scipy.linalg.cho_factor(gram, lower=True)
        except scipy.linalg.LinAlgError as err:
            eigs = np.linalg.eigvalsh(gram)
            raise np.linalg.LinAlgError(
                "Gram matrix is not positive definite "
                f"(eig range [{eigs[0]:.3e}, {eigs[-1]:.3e}]); "
                "the stacked design is row-rank deficient"
            ) from err

    def solve(self, z):
        """(stacked stacked^T)^{-1} z for a vector or a matrix of columns."""
        return scipy.linalg.cho_solve(self._cho, z)

    def row_space_map(self, z):
        """stacked^T (stacked stacked^T)^{-1} z, the min-norm preimage."""
        return self.problem.stacked.T @ self.solve(z)


def min_norm_least_squares(problem, gram=None):
    """Minimum-norm interpolant: vec(B) = X^T (X X^T)^{-1} y."""
    gram = gram or GramFactor(problem)
    return unvec(gram.row_space_map(problem.y), problem.p, problem.q)


@dataclass(frozen=True)
class WeightPair:
    """Adaptive weight matrices built from the least-squares SVD.

    W1 = U_ls diag(s_left)^{-gamma} U_ls^T and likewise for W2 with the
    right singular basis; inverses use the +gamma power of the same
    spectrum, so W1 @ W1inv = I exactly up to rounding.
    """

    W1: np.ndarray
    W2: np.ndarray
    W1inv: np.ndarray
    W2inv: np.ndarray
    gamma: float
    s_raw: np.ndarray      # singular values of B_ls, length min(p, q)
    s_left: np.ndarray     # padded/floored spectrum used for W1, length p
    s_right: np.ndarray    # padded/floored spectrum used for W2, length q
    floored: bool          # True when the small-value floor was applied


def _sym(m):
    return 0.5 * (m + m.T)


def compute_weights(b_ls, gamma, n):
    """Build the weight pair from the least-squares estimate.

    Singular values are padded with n^{-1/2} up to length p (left) and q
    (right); values below n^{-1/2} * SV_FLOOR_RTOL are floored there before
    the power so the inverses stay finite.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    b_ls = np.asarray(b_ls, dtype=float)
    p, q = b_ls.shape
    U, s, Vt = np.linalg.svd(b_ls, full_matrices=True)
    pad = n ** -0.5
    floor = pad * SV_FLOOR_RTOL

    s_left = np.concatenate([s, np.full(p - s.size, pad)])
    s_right = np.concatenate([s, np.full(q - s.size, pad)])
    floored = bool(np.any(s_left < floor) or np.any(s_right < floor))
    s_left = np.maximum(s_left, floor)
    s_right = np.maximum(s_right, floor)

    V = Vt.T
    W1 = _sym((U * s_left ** -gamma) @ U.T)
    W1inv = _sym((U * s_left ** gamma) @ U.T)
    W2 = _sym((V * s_right ** -gamma) @ V.T)
    W2inv = _sym((V * s_right ** gamma) @ V.T)
    return WeightPair(
        W1=W1, W2=W2, W1inv=W1inv, W2inv=W2inv, gamma=gamma,
        s_raw=s, s_left=s_left, s_right=s_right, floored=floored,
    )


def penalty_scales(weights):
    """Geometric means of the singular values of W1 and W2.

    lambda ||W1 B W2||_* is invariant under W1 -> W1/g1, W2 -> W2/g2,
    lambda -> lambda g1 g2, and dividing out the geometric means puts the
    penalty maps on unit scale. The weights can be badly out of scale (the
    -gamma power of small least-squares singular values), which ruins the
    conditioning of the ADMM splitting; the rescaled form converges in
    hundreds of iterations where the raw form does not converge at all.
    """
    g1 = float(np.exp(-weights.gamma * np.mean(np.log(weights.s_left))))
    g2 = float(np.exp(-weights.gamma * np.mean(np.log(weights.s_right))))
    return g1, g2


def lambda_max(problem, weights):
    """Smallest lambda at which B = 0 solves the regularized problem.

    Dual feasibility of theta = -y/(n lambda) at B = 0 gives
    lambda_max = ||W1^{-1} (sum_i y_i X_i) W2^{-1}||_2 / n.
    """
    s = unvec(problem.stacked.T @ problem.y, problem.p, problem.q)
    return float(np.linalg.norm(weights.W1inv @ s @ weights.W2inv, 2) / problem.n)

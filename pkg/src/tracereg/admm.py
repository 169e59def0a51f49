"""ADMM solver for the adaptive nuclear norm regularized problem.

Solves, over Theta in R^{d1 x d2},

    min (1/2n) sum_i (y_i - <Xt_i, Theta>)^2 + lambda ||M1 Theta M2||_*

with the splitting alpha = y - Xt vec(Theta) and C = M1 Theta M2. The
unreduced problem has Xt_i = X_i and M1, M2 the rescaled weight pair
(see penalty_scales); a screened problem passes the rotated designs and
the composed maps together with the embedding bases, so solutions always
come back in the original p x q coordinates.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .model import penalty_scales, unvec, vec
from .prox import nuclear_norm, prox_nuclear

GOLDEN_TAU_LIMIT = (math.sqrt(5.0) + 1.0) / 2.0


@dataclass(frozen=True)
class AdmmConfig:
    sigma: float = 1.0
    tau: float = 1.618
    tol_primal: float = 1e-6
    tol_dual: float = 1e-6
    max_iter: int = 5000
    track_objective: bool = False

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 < self.tau < GOLDEN_TAU_LIMIT:
            raise ValueError(
                f"tau must lie in (0, {GOLDEN_TAU_LIMIT:.6f}), got {self.tau}"
            )
        if self.tol_primal <= 0 or self.tol_dual <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class GeneralizedInstance:
    """One solve: designs, responses, penalty maps and embedding bases.

    Xt is (n, d1, d2); stacked is (n, d1*d2) with rows vec(Xt_i).
    M1 (p x d1) and M2 (d2 x q) define the penalty ||M1 Theta M2||_*.
    left (p x d1) and right (q x d2) embed a solution Theta back into the
    original coordinates as B = left @ Theta @ right.T; None means the
    instance is already in original coordinates.
    """

    Xt: np.ndarray
    stacked: np.ndarray
    y: np.ndarray
    M1: np.ndarray
    M2: np.ndarray
    lam: float
    left: np.ndarray | None = None
    right: np.ndarray | None = None
    lam_scale: float = 1.0       # lam = lam_scale * user-facing lambda

    def at_lambda(self, lam):
        """Sibling instance at a new user-facing lambda, same maps."""
        if lam <= 0:
            raise ValueError(f"lambda must be positive, got {lam}")
        return replace(self, lam=float(lam) * self.lam_scale)

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def d1(self):
        return self.M1.shape[1]

    @property
    def d2(self):
        return self.M2.shape[0]

    @property
    def p(self):
        return self.M1.shape[0]

    @property
    def q(self):
        return self.M2.shape[1]

    def embed(self, theta_mat):
        """Map a d1 x d2 iterate to original p x q coordinates."""
        b = theta_mat
        if self.left is not None:
            b = self.left @ b
        if self.right is not None:
            b = b @ self.right.T
        return b


def make_instance(problem, weights, lam):
    """Unreduced instance for the original problem at one lambda.

    The penalty maps are the weights divided by their singular value
    geometric means, with lambda scaled up by the same factors; the
    objective is unchanged and the splitting stays well conditioned at
    the default sigma.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    g1, g2 = penalty_scales(weights)
    return GeneralizedInstance(
        Xt=problem.X, stacked=problem.stacked, y=problem.y,
        M1=weights.W1 / g1, M2=weights.W2 / g2, lam=float(lam) * g1 * g2,
        lam_scale=g1 * g2,
    )


def assemble_system(instance):
    """The (d1 d2) x (d1 d2) normal matrix of the Theta update.

    Xt^T Xt + (M2 M2^T) kron (M1^T M1); lambda and sigma independent, so
    one factorization serves a whole path over lambda.
    """
    m2_part = instance.M2 @ instance.M2.T
    m1_part = instance.M1.T @ instance.M1
    return instance.stacked.T @ instance.stacked + np.kron(m2_part, m1_part)


class FactorCache:
    """Solver for the Theta-update system, built once per lambda path.

    Two routes. With n >= d1 d2 the assembled normal matrix is Cholesky
    factorized directly. In the underdetermined regime the Kronecker
    term is diagonalized by the eigenbases of the two small Gram factors
    and the rank-n data term folded in through the Woodbury identity, so
    one apply costs four small matrix products and an n x n solve
    instead of a dense (d1 d2)^2 backsolve; the assembled matrix is
    never formed. The dense route falls back to pseudo-inverse solves
    (with a note in the stored diagnostics) if the system is numerically
    indefinite, and the Woodbury route falls back to the dense one if
    either Gram factor is.
    """

    def __init__(self, instance):
        self.d1 = instance.d1
        self.d2 = instance.d2
        self.fallback = None
        self.mode = "empty"
        if self.d1 * self.d2 == 0:
            return
        if instance.n < self.d1 * self.d2:
            try:
                self._build_woodbury(instance)
                return
            except scipy.linalg.LinAlgError:
                pass
        self._build_dense(instance)

    def _build_dense(self, instance):
        self.mode = "dense"
        system = assemble_system(instance)
        try:
            self._cho = scipy.linalg.cho_factor(system, lower=True)
        except scipy.linalg.LinAlgError:
            eigs = np.linalg.eigvalsh(system)
            self.fallback = (
                f"Cholesky failed, eig range [{eigs[0]:.3e}, {eigs[-1]:.3e}]; "
                "using pseudo-inverse solves"
            )
            self._cho = None
            self._pinv = np.linalg.pinv(system)

    def _build_woodbury(self, instance):
        l1, q1 = np.linalg.eigh(instance.M1.T @ instance.M1)
        l2, q2 = np.linalg.eigh(instance.M2 @ instance.M2.T)
        if l1[0] <= 0.0 or l2[0] <= 0.0:
            raise scipy.linalg.LinAlgError("Kronecker term not positive definite")
        self._q1, self._q2 = q1, q2
        self._denom = np.outer(l1, l2)
        # rows of X G^{-1}, via the same rotation applied to every design
        rot = (q1.T @ instance.Xt) @ q2
        rot /= self._denom[None, :, :]
        back = (q1 @ rot) @ q2.T
        self._gx = back.transpose(0, 2, 1).reshape(instance.n, -1)
        mid = np.eye(instance.n) + instance.stacked @ self._gx.T
        self._mid = scipy.linalg.cho_factor(mid, lower=True)
        self._stacked = instance.stacked
        self.mode = "woodbury"

    def _g_solve(self, rhs):
        t = self._q1.T @ unvec(rhs, self.d1, self.d2) @ self._q2
        t = t / self._denom
        return vec(self._q1 @ t @ self._q2.T)

    def solve(self, rhs):
        if self.d1 * self.d2 == 0:
            return np.zeros(0)
        if self.mode == "woodbury":
            g = self._g_solve(rhs)
            s = scipy.linalg.cho_solve(self._mid, self._stacked @ g)
            return g - self._gx.T @ s
        if self._cho is not None:
            return scipy.linalg.cho_solve(self._cho, rhs)
        return self._pinv @ rhs


def precompute(instance):
    return FactorCache(instance)


@dataclass
class AdmmState:
    """Mutable iterate bundle; arrays live in reduced (Theta) coordinates."""

    B: np.ndarray          # (d1, d2)
    alpha: np.ndarray      # (n,)
    C: np.ndarray          # (p, q)
    theta: np.ndarray      # (n,) multiplier for y - Xt vec(B) - alpha = 0
    D: np.ndarray          # (p, q) multiplier for M1 B M2 - C = 0
    xb: np.ndarray         # cached stacked @ vec(B)
    m1bm2: np.ndarray      # cached M1 @ B @ M2
    iteration: int = 0

    @classmethod
    def cold(cls, instance):
        return cls(
            B=np.zeros((instance.d1, instance.d2)),
            alpha=np.zeros(instance.n),
            C=np.zeros((instance.p, instance.q)),
            theta=np.zeros(instance.n),
            D=np.zeros((instance.p, instance.q)),
            xb=np.zeros(instance.n),
            m1bm2=np.zeros((instance.p, instance.q)),
        )


def update_b(state, instance, cache, config):
    """Theta update: solve the cached SPD system for the new iterate."""
    sigma = config.sigma
    rhs = vec(instance.M1.T @ (state.D + sigma * state.C) @ instance.M2.T)
    rhs = rhs + instance.stacked.T @ (
        sigma * instance.y - state.theta - sigma * state.alpha
    )
    return unvec(cache.solve(rhs) / sigma, instance.d1, instance.d2)


def update_alpha(state, instance, config):
    """Residual-variable update; uses the already refreshed xb cache."""
    sigma = config.sigma
    return (sigma * instance.y - state.theta - sigma * state.xb) / (1.0 / instance.n + sigma)


def update_c(state, instance, config):
    """Nuclear prox step on the penalty split variable."""
    return prox_nuclear(state.m1bm2 - state.D / config.sigma, instance.lam / config.sigma)


def update_duals(state, instance, config):
    """Gradient ascent on both multipliers with step tau * sigma."""
    step = config.tau * config.sigma
    theta = state.theta - step * (instance.y - state.xb - state.alpha)
    dmat = state.D - step * (state.m1bm2 - state.C)
    return theta, dmat


@dataclass(frozen=True)
class Solution:
    B: np.ndarray          # embedded p x q solution
    theta: np.ndarray      # final multiplier estimate
    objective: float
    iters: int
    converged: bool
    solve_time_ms: float
    primal_residual: float
    dual_residual: float
    objective_trace: tuple = ()
    final_state: AdmmState | None = None


def objective_value(instance, theta_mat):
    """(1/2n) sum (y - <Xt, Theta>)^2 + lambda ||M1 Theta M2||_*."""
    resid = instance.y - instance.stacked @ vec(theta_mat)
    fit = 0.5 / instance.n * float(resid @ resid)
    return fit + instance.lam * nuclear_norm(instance.M1 @ theta_mat @ instance.M2)


def solve(instance, config=None, cache=None, warm_start=None):
    """Run ADMM to the residual tolerances; never raises on non-convergence.

    Returns the best iterate with converged=False when max_iter is hit;
    callers that require convergence must check the flag.
    """
    config = config or AdmmConfig()
    cache = cache or precompute(instance)
    t0 = time.perf_counter()

    state = warm_start or AdmmState.cold(instance)
    y_scale = 1.0 + float(np.linalg.norm(instance.y))
    trace = []
    converged = False
    rp = rd = float("inf")

    for it in range(1, config.max_iter + 1):
        prev_b, prev_alpha, prev_c = state.B, state.alpha, state.C

        state.B = update_b(state, instance, cache, config)
        state.xb = instance.stacked @ vec(state.B)
        state.m1bm2 = instance.M1 @ state.B @ instance.M2
        state.alpha = update_alpha(state, instance, config)
        state.C = update_c(state, instance, config)
        state.theta, state.D = update_duals(state, instance, config)
        state.iteration = it

        if config.track_objective:
            trace.append(objective_value(instance, state.B))

        rp_fit = np.linalg.norm(instance.y - state.xb - state.alpha) / y_scale
        rp_split = np.linalg.norm(state.m1bm2 - state.C) / (
            1.0 + np.linalg.norm(state.C)
        )
        rp = max(rp_fit, rp_split)
        rd = max(
            np.linalg.norm(state.B - prev_b) / (1.0 + np.linalg.norm(prev_b)),
            np.linalg.norm(state.alpha - prev_alpha) / (1.0 + np.linalg.norm(prev_alpha)),
            np.linalg.norm(state.C - prev_c) / (1.0 + np.linalg.norm(prev_c)),
        )
        if rp <= config.tol_primal and rd <= config.tol_dual:
            converged = True
            break

    elapsed_ms = (time.perf_counter() - t0) * 1e3
    return Solution(
        B=instance.embed(state.B),
        theta=state.theta.copy(),
        objective=objective_value(instance, state.B),
        iters=state.iteration,
        converged=converged,
        solve_time_ms=elapsed_ms,
        primal_residual=float(rp),
        dual_residual=float(rd),
        objective_trace=tuple(trace),
        final_state=state,
    )

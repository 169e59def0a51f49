"""Solver engine: instances, cached factorization, update steps, full solves."""

import numpy as np
import pytest

from tracereg import (
    AdmmConfig,
    GeneralizedInstance,
    build_problem,
    compute_weights,
    dual_feasibility_gauge,
    lambda_max,
    make_instance,
    min_norm_least_squares,
    nuclear_norm,
    objective_value,
    precompute,
    solve,
    subdifferential_residual,
    unvec,
    vec,
)
from tracereg.admm import (
    AdmmState,
    assemble_system,
    update_alpha,
    update_b,
    update_c,
    update_duals,
)
from tracereg.harness import GaussianSpec, gen_gaussian, prepare


def small_setup(seed, p=5, q=6, n=8, lam_ratio=0.3):
    problem, _ = gen_gaussian(GaussianSpec(p=p, q=q, n=n, seed=seed))
    weights, _, _ = prepare(problem, k=2)
    lam = lam_ratio * lambda_max(problem, weights)
    return problem, weights, lam


def scalar_instance(y=2.0, lam=0.5):
    return GeneralizedInstance(
        Xt=np.ones((1, 1, 1)), stacked=np.ones((1, 1)), y=np.array([y]),
        M1=np.eye(1), M2=np.eye(1), lam=lam,
    )


def random_state(instance, rng):
    return AdmmState(
        B=rng.standard_normal((instance.d1, instance.d2)),
        alpha=rng.standard_normal(instance.n),
        C=rng.standard_normal((instance.p, instance.q)),
        theta=rng.standard_normal(instance.n),
        D=rng.standard_normal((instance.p, instance.q)),
        xb=np.zeros(instance.n),
        m1bm2=np.zeros((instance.p, instance.q)),
    )


def test_config_validation():
    with pytest.raises(ValueError, match="sigma"):
        AdmmConfig(sigma=0.0)
    with pytest.raises(ValueError, match="tau"):
        AdmmConfig(tau=1.62)
    with pytest.raises(ValueError, match="tau"):
        AdmmConfig(tau=0.0)
    with pytest.raises(ValueError, match="tolerances"):
        AdmmConfig(tol_primal=0.0)
    with pytest.raises(ValueError, match="max_iter"):
        AdmmConfig(max_iter=0)
    AdmmConfig(tau=1.618)  # just inside the golden ratio bound


def test_make_instance_objective_bookkeeping():
    # the rescaled maps and rescaled lambda must leave the user-facing
    # objective untouched
    problem, weights, lam = small_setup(0)
    instance = make_instance(problem, weights, lam)
    rng = np.random.default_rng(0)
    for _ in range(5):
        b = rng.standard_normal((problem.p, problem.q))
        resid = problem.y - problem.stacked @ vec(b)
        direct = 0.5 / problem.n * float(resid @ resid) + lam * nuclear_norm(
            weights.W1 @ b @ weights.W2
        )
        assert abs(objective_value(instance, b) - direct) <= 1e-12 * (1.0 + direct)


def test_make_instance_rejects_nonpositive_lambda():
    problem, weights, _ = small_setup(1)
    with pytest.raises(ValueError, match="lambda"):
        make_instance(problem, weights, 0.0)


def test_at_lambda_scales_consistently():
    problem, weights, lam = small_setup(2)
    base = make_instance(problem, weights, lam)
    sibling = base.at_lambda(0.7 * lam)
    assert np.isclose(sibling.lam, 0.7 * lam * base.lam_scale, rtol=1e-15)
    assert sibling.M1 is base.M1 and sibling.M2 is base.M2
    with pytest.raises(ValueError, match="positive"):
        base.at_lambda(-1.0)


def test_assemble_system_hand_cases():
    # zero designs with identity maps: the system is the identity
    inst = GeneralizedInstance(
        Xt=np.zeros((1, 2, 2)), stacked=np.zeros((1, 4)), y=np.zeros(1),
        M1=np.eye(2), M2=np.eye(2), lam=1.0,
    )
    assert np.array_equal(assemble_system(inst), np.eye(4))

    # single X = I_2: vec(I) vec(I)^T + I_4
    inst = GeneralizedInstance(
        Xt=np.eye(2)[None], stacked=vec(np.eye(2))[None], y=np.zeros(1),
        M1=np.eye(2), M2=np.eye(2), lam=1.0,
    )
    v = vec(np.eye(2))
    assert np.array_equal(assemble_system(inst), np.outer(v, v) + np.eye(4))


def test_factor_cache_solves_the_system():
    problem, weights, lam = small_setup(3)
    instance = make_instance(problem, weights, lam)
    cache = precompute(instance)
    # n < d1 d2 takes the Woodbury route; check it against the matrix
    assert cache.mode == "woodbury"
    system = assemble_system(instance)
    rng = np.random.default_rng(3)
    z = rng.standard_normal(instance.d1 * instance.d2)
    assert np.linalg.norm(system @ cache.solve(z) - z) <= 1e-8 * np.linalg.norm(z)
    assert cache.fallback is None


def test_factor_cache_dense_route_when_overdetermined():
    rng = np.random.default_rng(7)
    n, d1, d2 = 9, 2, 3
    xt = rng.standard_normal((n, d1, d2))
    instance = GeneralizedInstance(
        Xt=xt, stacked=xt.transpose(0, 2, 1).reshape(n, -1),
        y=rng.standard_normal(n),
        M1=np.diag([1.0, 2.0]), M2=np.diag([1.0, 0.5, 2.0]), lam=0.1,
    )
    cache = precompute(instance)
    assert cache.mode == "dense"
    system = assemble_system(instance)
    z = rng.standard_normal(6)
    assert np.linalg.norm(system @ cache.solve(z) - z) <= 1e-10 * np.linalg.norm(z)


def test_factor_cache_routes_agree():
    from tracereg.admm import FactorCache

    for seed in range(4):
        problem, weights, lam = small_setup(seed, p=4, q=5, n=11)
        instance = make_instance(problem, weights, lam)
        fast = precompute(instance)
        dense = FactorCache.__new__(FactorCache)
        dense.d1, dense.d2, dense.fallback = instance.d1, instance.d2, None
        dense._build_dense(instance)
        assert fast.mode == "woodbury" and dense.mode == "dense"
        rng = np.random.default_rng(seed)
        for _ in range(3):
            z = rng.standard_normal(20)
            a, b = fast.solve(z), dense.solve(z)
            assert np.linalg.norm(a - b) <= 1e-10 * (1.0 + np.linalg.norm(b))


def test_factor_cache_fallback_on_indefinite_system():
    inst = GeneralizedInstance(
        Xt=np.zeros((1, 2, 2)), stacked=np.zeros((1, 4)), y=np.zeros(1),
        M1=np.zeros((2, 2)), M2=np.zeros((2, 2)), lam=1.0,
    )
    cache = precompute(inst)
    assert cache.fallback is not None
    assert np.array_equal(cache.solve(np.ones(4)), np.zeros(4))


def test_update_b_stationarity():
    problem, weights, lam = small_setup(4)
    instance = make_instance(problem, weights, lam)
    cache = precompute(instance)
    config = AdmmConfig(sigma=1.3)
    rng = np.random.default_rng(4)
    state = random_state(instance, rng)
    b_new = update_b(state, instance, cache, config)

    sigma = config.sigma
    system = assemble_system(instance)
    rhs = vec(instance.M1.T @ (state.D + sigma * state.C) @ instance.M2.T)
    rhs = rhs + instance.stacked.T @ (
        sigma * instance.y - state.theta - sigma * state.alpha
    )
    resid = sigma * system @ vec(b_new) - rhs
    assert np.linalg.norm(resid) <= 1e-8 * (1.0 + np.linalg.norm(rhs))


def test_update_alpha_scalar_and_stationarity():
    inst = scalar_instance()
    config = AdmmConfig()
    state = AdmmState.cold(inst)
    assert np.allclose(update_alpha(state, inst, config), [1.0])

    problem, weights, lam = small_setup(5)
    instance = make_instance(problem, weights, lam)
    rng = np.random.default_rng(5)
    state = random_state(instance, rng)
    state.xb = instance.stacked @ vec(state.B)
    alpha = update_alpha(state, instance, config)
    resid = alpha / instance.n + state.theta - config.sigma * (
        instance.y - state.xb - alpha
    )
    assert np.linalg.norm(resid) <= 1e-10 * (1.0 + np.linalg.norm(alpha))


def test_update_c_is_the_prox_step():
    problem, weights, lam = small_setup(6)
    instance = make_instance(problem, weights, lam)
    config = AdmmConfig(sigma=0.8)
    rng = np.random.default_rng(6)
    state = random_state(instance, rng)
    state.m1bm2 = instance.M1 @ state.B @ instance.M2
    c_new = update_c(state, instance, config)

    # prox optimality: (target - C)/(lam/sigma) is a plain nuclear norm
    # subgradient at C (identity weights: padding with n = 1 keeps them I)
    target = state.m1bm2 - state.D / config.sigma
    identity = compute_weights(np.eye(instance.p, instance.q), 1.0, 1)
    gap = (target - c_new) / (instance.lam / config.sigma)
    assert subdifferential_residual(c_new, gap, identity) <= 1e-7

    # full thresholding: a huge lambda zeroes C
    big = GeneralizedInstance(
        Xt=instance.Xt, stacked=instance.stacked, y=instance.y,
        M1=instance.M1, M2=instance.M2, lam=1e9,
    )
    assert np.allclose(update_c(state, big, config), 0.0)


def test_update_duals():
    problem, weights, lam = small_setup(7)
    instance = make_instance(problem, weights, lam)
    config = AdmmConfig()
    rng = np.random.default_rng(7)
    state = random_state(instance, rng)
    state.xb = instance.stacked @ vec(state.B)
    state.m1bm2 = instance.M1 @ state.B @ instance.M2

    theta_new, d_new = update_duals(state, instance, config)
    step = config.tau * config.sigma
    r_fit = instance.y - state.xb - state.alpha
    assert np.isclose(
        np.linalg.norm(theta_new - state.theta), step * np.linalg.norm(r_fit)
    )
    assert np.allclose(d_new, state.D - step * (state.m1bm2 - state.C))

    # a feasible state leaves both multipliers unchanged
    state.alpha = instance.y - state.xb
    state.C = state.m1bm2.copy()
    theta_new, d_new = update_duals(state, instance, config)
    assert np.array_equal(theta_new, state.theta)
    assert np.array_equal(d_new, state.D)


def test_solve_scalar_soft_threshold():
    # minimize (1/2)(2 - b)^2 + 0.5 |b|: the soft threshold gives b = 1.5
    inst = scalar_instance(y=2.0, lam=0.5)
    sol = solve(inst, AdmmConfig(tol_primal=1e-13, tol_dual=1e-13, max_iter=100000))
    assert sol.converged
    assert abs(sol.B[0, 0] - 1.5) <= 1e-10


def test_solve_zero_at_lambda_max():
    # the iterate norm tracks the solver tolerance (about 10x), so certify
    # the zero solution at a tolerance below the 1e-6 target
    config = AdmmConfig(tol_primal=1e-8, tol_dual=1e-8, max_iter=50000)
    for seed in range(3):
        problem, weights, _ = small_setup(10 + seed)
        lmax = lambda_max(problem, weights)
        sol = solve(make_instance(problem, weights, 1.05 * lmax), config)
        assert sol.converged
        assert np.linalg.norm(sol.B) <= 1e-6


def test_solve_kkt_at_convergence():
    # solve well below the rank-cut rtol so the noise singular values of
    # W1 B W2 cannot masquerade as active directions
    config = AdmmConfig(tol_primal=1e-8, tol_dual=1e-8, max_iter=100000)
    for seed in range(5):
        problem, weights, lam = small_setup(20 + seed)
        sol = solve(make_instance(problem, weights, lam), config)
        assert sol.converged

        theta_kkt = (problem.stacked @ vec(sol.B) - problem.y) / (problem.n * lam)
        stat = problem.y - problem.stacked @ vec(sol.B) + problem.n * lam * theta_kkt
        assert np.linalg.norm(stat) <= 1e-6 * (1.0 + np.linalg.norm(problem.y))
        assert dual_feasibility_gauge(theta_kkt, problem, weights) <= 1.0 + 1e-6

        # stationarity: the negative loss gradient scaled by 1/lambda is a
        # subgradient of the weighted nuclear norm at the solution
        g = -unvec(
            problem.stacked.T @ (problem.stacked @ vec(sol.B) - problem.y),
            problem.p, problem.q,
        ) / (problem.n * lam)
        assert subdifferential_residual(sol.B, g, weights, rtol=1e-5) <= 1e-5


def test_solve_objective_eventually_decreases():
    problem, weights, lam = small_setup(30)
    inst = make_instance(problem, weights, lam)
    sol = solve(inst, AdmmConfig(track_objective=True))
    trace = sol.objective_trace
    assert len(trace) == sol.iters
    assert trace[-1] <= trace[9] + 1e-10
    assert abs(sol.objective - objective_value(inst, sol.final_state.B)) <= 1e-12 * (
        1.0 + abs(sol.objective)
    )


def test_solve_reports_non_convergence():
    problem, weights, lam = small_setup(31)
    inst = make_instance(problem, weights, lam)
    sol = solve(inst, AdmmConfig(max_iter=3))
    assert not sol.converged
    assert sol.iters == 3


def test_warm_start_reduces_total_iterations():
    problem, weights, _ = small_setup(32)
    lmax = lambda_max(problem, weights)
    lams = [0.2 * lmax, 0.25 * lmax, 0.3 * lmax, 0.35 * lmax]
    base = make_instance(problem, weights, lams[0])
    cache = precompute(base)

    cold = [solve(base.at_lambda(l), cache=cache).iters for l in lams]
    state = None
    warm = []
    for l in lams:
        sol = solve(base.at_lambda(l), cache=cache, warm_start=state)
        warm.append(sol.iters)
        state = sol.final_state
    assert sum(warm) < sum(cold)


def test_rotation_equivalence():
    # rotating the designs into the maps must not change the embedded solution
    rng = np.random.default_rng(33)
    problem, weights, lam = small_setup(33)
    base = make_instance(problem, weights, lam)

    u, _ = np.linalg.qr(rng.standard_normal((problem.p, problem.p)))
    v, _ = np.linalg.qr(rng.standard_normal((problem.q, problem.q)))
    x_rot = u.T @ problem.X @ v
    rotated = GeneralizedInstance(
        Xt=x_rot,
        stacked=x_rot.transpose(0, 2, 1).reshape(problem.n, -1),
        y=problem.y,
        M1=base.M1 @ u, M2=v.T @ base.M2,
        lam=base.lam, lam_scale=base.lam_scale,
        left=u, right=v,
    )
    sol0 = solve(base)
    sol1 = solve(rotated)
    assert sol0.converged and sol1.converged
    assert np.linalg.norm(sol0.B - sol1.B) <= 1e-6 * (1.0 + np.linalg.norm(sol0.B))
    assert abs(sol0.objective - sol1.objective) <= 1e-8 * (1.0 + sol0.objective)

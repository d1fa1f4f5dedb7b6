import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rbdeconv.experiments.runners import initialize, synthetic_trial
from rbdeconv.linops import leading_singular_triple, random_operator
from rbdeconv.manifold import FactorPair, balance, horizontal_project, is_balanced, metric, retract, transport
from rbdeconv.objective import Objective, PenaltyParams, coherence
from rbdeconv.solvers import (
    FactorPenaltyObjective,
    SolverConfig,
    ama_solve,
    bb_initial_step,
    bb_step,
    coherence_project,
    init_from_triple,
    riemannian_step_balanced,
    riemannian_step_projected,
    rmse,
    rsd_solve,
    spectral_init,
    wirtinger_solve,
)

from conftest import cvec, rand_pair


def peak(op, z):
    return np.sqrt(op.L) * np.max(np.abs(op.B(z)))


# ---------------------------------------------------------------- config


@pytest.mark.parametrize(
    "kwargs",
    [
        {"step_policy": "newton"},
        {"shrink": 1.0},
        {"shrink": 0.0},
        {"rel_residual_tol": 0.0},
        {"grad_ratio_tol": -1.0},
        {"step_policy": "fixed"},
        {"max_backtracks": 0},
    ],
)
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_rmse_zero_for_equivalent_representatives(rng):
    x = rand_pair(rng, 5, 4)
    assert rmse(x.act(2.0 - 1.5j), x) <= 1e-15


# ---------------------------------------------------------------- coherence projection


def test_projection_keeps_feasible_point(rng):
    op = random_operator(64, 8, 4, seed=0)
    z = cvec(rng, 8)
    out = coherence_project(z, 2 * peak(op, z), op)
    assert np.array_equal(out, z)


def test_projection_exact_for_square_unitary_b(rng):
    op = random_operator(32, 32, 4, seed=1)
    z = cvec(rng, 32)
    bound = 0.5 * peak(op, z)
    w = op.B(z)
    cap = bound / np.sqrt(op.L)
    clipped = np.where(np.abs(w) > cap, w * cap / np.maximum(np.abs(w), 1e-300), w)
    oracle = op.Bt(clipped)
    np.testing.assert_allclose(coherence_project(z, bound, op), oracle, atol=1e-8 * np.linalg.norm(z))


@pytest.mark.parametrize("seed", range(10))
def test_projection_feasible_and_no_worse_than_clip(seed):
    r = np.random.default_rng(seed)
    op = random_operator(80, 10, 4, seed)
    z = cvec(r, 10)
    z[0] += 6.0  # concentrate energy at zero frequency so the bound binds
    bound = 0.6 * peak(op, z)
    out = coherence_project(z, bound, op)
    assert peak(op, out) <= bound * (1 + 1e-12)
    w = op.B(z)
    cap = bound / np.sqrt(op.L)
    clip_once = z - op.Bt(w - np.where(np.abs(w) > cap, w * cap / np.abs(w), w))
    candidates = [z * bound / peak(op, z), clip_once * min(1.0, bound / peak(op, clip_once))]
    best = min(np.linalg.norm(c - z) for c in candidates)
    assert np.linalg.norm(out - z) <= best * (1 + 1e-9)


def test_projection_rejects_nonpositive_bound(rng):
    op = random_operator(16, 4, 2, seed=0)
    with pytest.raises(ValueError):
        coherence_project(cvec(rng, 4), 0.0, op)


# ---------------------------------------------------------------- spectral initialization


def test_spectral_init_inactive_constraint_is_scaled_vector():
    t = synthetic_trial(120, 8, 6, seed=4)
    d, u, v = leading_singular_triple(t.op, t.y, seed=0)
    x0, d2 = spectral_init(t.op, t.y, mu=1e6, seed=0)
    assert d2 == d
    assert is_balanced(x0)
    # undo the balancing: m0 = sqrt(d) v has norm sqrt(d)
    h0 = x0.h * np.linalg.norm(x0.m) / np.sqrt(d)
    np.testing.assert_allclose(h0, np.sqrt(d) * u, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("seed", range(100))
def test_spectral_init_feasible(seed):
    t = synthetic_trial(60, 6, 5, seed=seed)
    d, u, v = leading_singular_triple(t.op, t.y, seed=seed)
    mu = 1.0
    x0 = init_from_triple(t.op, d, u, v, mu)
    h0 = x0.h * np.linalg.norm(x0.m) / np.sqrt(d)
    assert peak(t.op, h0) <= 2 * np.sqrt(d) * mu + 1e-9
    np.testing.assert_allclose(x0.product(), np.outer(h0, np.conj(np.sqrt(d) * v)), atol=1e-12 * d)


def test_spectral_init_lands_near_truth():
    t = synthetic_trial(500, 50, 50, seed=1)
    x0, d = initialize(t.op, t.y, seed=1)
    dstar = np.linalg.norm(t.truth.h) * np.linalg.norm(t.truth.m)
    assert 0.5 * dstar < d < 2 * dstar
    assert rmse(x0, t.truth) < 0.8


# ---------------------------------------------------------------- BB step


def test_bb_step_quadratic_model(rng):
    # gradient linear along the step: grad(x) = a (x - x*); BB returns 1/a, the exact minimizer
    a = 3.7
    xs = rng.standard_normal(6)
    x0 = rng.standard_normal(6)
    direction = xs - x0
    x1 = x0 + 0.3 * direction
    s, yv = x1 - x0, a * (x1 - xs) - a * (x0 - xs)
    alpha = bb_step(s, yv, fallback=-1.0)
    assert alpha == pytest.approx(1 / a, rel=1e-8)
    np.testing.assert_allclose(x1 - alpha * a * (x1 - xs), xs, atol=1e-8)


@pytest.mark.parametrize(
    "s,yv",
    [
        (np.ones(3), np.zeros(3)),
        (np.ones(3), -np.ones(3)),
        (np.ones(3), 1e-9 * np.ones(3)),
        (np.ones(3), np.array([np.nan, 0.0, 1.0])),
    ],
)
def test_bb_step_fallbacks(s, yv):
    assert bb_step(s, yv, fallback=0.25, cap=1e6) == 0.25


@pytest.mark.parametrize("seed", range(5))
def test_bb_intrinsic_equals_extrinsic(seed):
    r = np.random.default_rng(seed)
    op = random_operator(40, 5, 4, seed)
    obj = Objective(op, cvec(r, 40))
    x = balance(rand_pair(r, 5, 4))
    g = obj.riemannian_gradient(x)
    eta = g * -0.05
    xn = retract(x, eta)
    gh, gm = obj.euclidean_gradient(xn)
    nh, nm = xn.norms()
    gn = horizontal_project(xn, (gh / nm**2, gm / nh**2))
    s = transport(eta, eta)
    yv = gn - transport(eta, g)
    ext = metric(xn, s, yv) / metric(xn, yv, yv)
    got = bb_initial_step(x, g, eta, xn, gn, fallback=-1.0)
    assert got == pytest.approx(ext, rel=1e-10)
    # a positive rescaling of the new point gives the same step
    xb = balance(xn)
    gb = obj.riemannian_gradient(obj.rebalance(xb))
    assert bb_initial_step(x, g, eta, xb, gb, fallback=-1.0) == pytest.approx(got, rel=1e-10)


# ---------------------------------------------------------------- Riemannian descent


def test_rsd_ground_truth_is_fixed_point(small_problem):
    op, truth, y = small_problem
    rep = rsd_solve(Objective(op, y), truth, d=1.0)
    assert rep.iterations == 0 and rep.reason == "converged"
    assert rep.residuals == [pytest.approx(0.0, abs=1e-15)]


@pytest.mark.parametrize("seed", range(6))
def test_update_equivalence(seed):
    r = np.random.default_rng(seed)
    op = random_operator(40, 5, 4, seed)
    obj = Objective(op, cvec(r, 40), PenaltyParams(2.0, 1.0, 0.3))
    x = balance(rand_pair(r, 5, 4))
    a = riemannian_step_projected(obj, x, 0.1)
    b = riemannian_step_balanced(obj, x, 0.1)
    d = np.prod(x.norms())
    np.testing.assert_allclose(a.h, b.h, atol=1e-12 * np.sqrt(d))
    np.testing.assert_allclose(a.m, b.m, atol=1e-12 * np.sqrt(d))


@pytest.mark.parametrize("policy", ["bb_backtracking", "backtracking"])
def test_rsd_sufficient_decrease_and_counts(policy):
    t = synthetic_trial(120, 8, 6, seed=2)
    x0, d = initialize(t.op, t.y, seed=2)
    obj = Objective(t.op, t.y, PenaltyParams.experiment(d, 120, 8, 6))
    cfg = SolverConfig(max_iter=300, step_policy=policy)
    rep = rsd_solve(obj, x0, d, cfg, truth=t.truth)
    assert rep.reason == "converged" and rep.rmse < 1e-7
    c = cfg.armijo_c
    for k, (alpha, gn) in enumerate(zip(rep.steps, rep.grad_norms)):
        assert rep.costs[k + 1] <= rep.costs[k] - c * alpha * gn**2 + 1e-15 * rep.costs[0]
    assert rep.counters["nBh"] == rep.counters["nCm"]
    assert rep.counters["nFFT"] > 0


def test_rsd_fixed_step_linear_rate():
    t = synthetic_trial(400, 20, 20, seed=5)
    x0, d = initialize(t.op, t.y, seed=5)
    cfg = SolverConfig(max_iter=400, step_policy="fixed", fixed_step=0.8 / d, rel_residual_tol=None, record_iterates=True)
    rep = rsd_solve(Objective(t.op, t.y), x0, d, cfg)
    err = np.array([np.linalg.norm(x.product() - t.truth.product()) for x in rep.iterates])
    rates = np.diff(np.log(err))
    assert np.all(rates[20:] < 0)
    late = rates[200:]
    assert np.ptp(late) <= 0.1 * abs(late.mean())


def test_rsd_stall_reason(small_problem):
    op, truth, y = small_problem
    rng = np.random.default_rng(0)
    x0 = rand_pair(rng, op.K, op.N)
    # a huge first step with one backtrack cannot satisfy Armijo
    cfg = SolverConfig(max_iter=5, step_policy="backtracking", init_step=1e12, max_backtracks=1)
    rep = rsd_solve(Objective(op, y), x0, 1.0, cfg)
    assert rep.reason == "stalled" and rep.iterations == 0


def test_rsd_checkpoints_and_grad_ratio_stop():
    t = synthetic_trial(120, 8, 6, seed=7, snr_db=30.0)
    x0, d = initialize(t.op, t.y, seed=7)
    cfg = SolverConfig(max_iter=5000, rel_residual_tol=None, grad_ratio_tol=1e-6, checkpoints=(0, 3))
    rep = rsd_solve(Objective(t.op, t.y), x0, d, cfg)
    assert rep.reason == "gradient"
    assert set(rep.checkpoints) == {0, 3}
    assert rep.checkpoints[0][2] == {"nBh": 1, "nCm": 1, "nFFT": 2}  # the initial cost only


@given(st.integers(0, 1000), st.floats(0.2, 5.0), st.floats(-np.pi, np.pi))
def test_rsd_representation_independence(seed, mag, ang):
    t = synthetic_trial(60, 5, 4, seed=seed)
    x0, d = initialize(t.op, t.y, seed=seed)
    cfg = SolverConfig(max_iter=25, record_iterates=True)
    a = rsd_solve(Objective(t.op, t.y, PenaltyParams.experiment(d, 60, 5, 4)), x0, d, cfg)
    b = rsd_solve(Objective(t.op, t.y, PenaltyParams.experiment(d, 60, 5, 4)), x0.act(mag * np.exp(1j * ang)), d, cfg)
    dstar = np.linalg.norm(t.truth.h) * np.linalg.norm(t.truth.m)
    assert len(a.iterates) == len(b.iterates)
    for xa, xb in zip(a.iterates, b.iterates):
        assert np.linalg.norm(xa.product() - xb.product()) <= 1e-8 * dstar


# ---------------------------------------------------------------- Wirtinger baseline


def _factor_setup(seed, K=5, N=4, L=40):
    r = np.random.default_rng(seed)
    op = random_operator(L, K, N, seed)
    x = rand_pair(r, K, N)
    x = FactorPair(x.h + np.array([4.0] + [0.0] * (K - 1)), x.m)  # coherent h
    y = op.forward(x.h, x.m) + 0.3 * cvec(r, L)
    d = 0.3 * np.linalg.norm(x.h) * np.linalg.norm(x.m)  # norm terms active too
    return r, op, x, FactorPenaltyObjective(op, y, rho=5.0, d=d, mu=0.5)


@pytest.mark.parametrize("seed", range(5))
def test_three_term_penalty_gradient_fd(seed):
    r, op, x, F = _factor_setup(seed)
    h, m = x.h, x.m
    assert F.cost(h, m) > np.linalg.norm(F.y - op.forward(h, m)) ** 2  # penalty active
    gh, gm = F.euclidean_gradient(h, m)
    for _ in range(5):
        vh, vm = cvec(r, op.K), cvec(r, op.N)
        t = 1e-6
        fd = (F.cost(h + t * vh, m + t * vm) - F.cost(h - t * vh, m - t * vm)) / (2 * t)
        an = np.vdot(gh, vh).real + np.vdot(gm, vm).real
        assert an == pytest.approx(fd, rel=1e-5)


@pytest.mark.parametrize("rho", [0.0, 5.0])
def test_wirtinger_is_half_euclidean(rho):
    r, op, x, F = _factor_setup(1)
    F = FactorPenaltyObjective(op, F.y, rho, F.d, F.mu)
    gh, gm = F.euclidean_gradient(x.h, x.m)
    wh, wm = F.wirtinger_gradient(x.h, x.m)
    np.testing.assert_allclose(wh, gh / 2, rtol=1e-12, atol=1e-12 * np.abs(gh).max())
    np.testing.assert_allclose(wm, gm / 2, rtol=1e-12, atol=1e-12 * np.abs(gm).max())


def test_wirtinger_ground_truth_fixed_point(small_problem):
    op, truth, y = small_problem
    d = np.linalg.norm(truth.h) * np.linalg.norm(truth.m)
    mu = 2 * coherence(op, truth.h)
    F = FactorPenaltyObjective(op, y, d * d / 100, d, mu)
    wh, wm = F.wirtinger_gradient(truth.h, truth.m)
    assert max(np.abs(wh).max(), np.abs(wm).max()) <= 1e-12 * d
    rep = wirtinger_solve(op, y, truth, d, mu)
    assert rep.iterations == 0 and rep.reason == "converged"


@pytest.mark.parametrize("variant", ["fixed", "bb"])
def test_wirtinger_converges_and_counts(variant):
    t = synthetic_trial(120, 8, 6, seed=3)
    x0, d = initialize(t.op, t.y, seed=3)
    mu = PenaltyParams.default_mu(120, 8, 6)
    rep = wirtinger_solve(t.op, t.y, x0, d, mu, SolverConfig(max_iter=3000), variant=variant, truth=t.truth)
    assert rep.reason == "converged" and rep.rmse < 1e-6
    assert rep.counters["nBh"] == rep.counters["nCm"]
    assert all(b <= a for a, b in zip(rep.costs, rep.costs[1:]))


def test_wirtinger_rejects_unknown_variant(small_problem):
    op, truth, y = small_problem
    with pytest.raises(ValueError):
        wirtinger_solve(op, y, truth, 1.0, 1.0, variant="lbfgs")


# ---------------------------------------------------------------- alternating minimization


def test_ama_ground_truth(small_problem):
    op, truth, y = small_problem
    rep = ama_solve(op, y, truth)
    assert rep.iterations == 0 and rep.reason == "converged"


@pytest.mark.parametrize("seed", range(10))
def test_ama_monotone(seed):
    t = synthetic_trial(80, 6, 5, seed=seed, snr_db=20.0)
    x0, d = initialize(t.op, t.y, seed=seed)
    rep = ama_solve(t.op, t.y, x0, SolverConfig(max_iter=60, rel_residual_tol=None))
    c = np.array(rep.costs)
    assert np.all(np.diff(c) <= 1e-12 * c[0])
    assert len(c) == 2 * rep.iterations + 1


@pytest.mark.parametrize("seed", range(5))
def test_ama_block_step_is_exact_minimizer(seed):
    r = np.random.default_rng(seed)
    op = random_operator(50, 5, 4, seed)
    y = cvec(r, 50)
    x = rand_pair(r, 5, 4)

    def F(m):
        return np.linalg.norm(y - op.forward(x.h, m)) ** 2

    res = op.forward(x.h, x.m) - y
    gm = op.Ct(2 * np.conj(res) * op.B(x.h))
    q = op.B(x.h) * np.conj(op.C(gm))
    tstar = np.vdot(gm, gm).real / (2 * np.vdot(q, q).real)
    best = F(x.m - tstar * gm)
    assert best <= F(x.m)
    for s in (0.9, 1.1):
        assert F(x.m - s * tstar * gm) > best
    rep = ama_solve(op, y, x, SolverConfig(max_iter=1, rel_residual_tol=None))
    assert rep.costs[1] == pytest.approx(best, rel=1e-10)


def test_ama_skips_zero_gradient_block():
    op = random_operator(30, 4, 3, seed=0)
    r = np.random.default_rng(0)
    x = rand_pair(r, 4, 3)
    y = op.forward(x.h, x.m)
    # exact data means both blocks are optimal at x; only the converged check stops it when tol is off
    rep = ama_solve(op, y, x, SolverConfig(max_iter=5, rel_residual_tol=None))
    assert rep.reason in ("stationary", "max_iter")
    assert rmse(rep.x, x) <= 1e-12

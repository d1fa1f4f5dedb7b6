"""Batch run of the library's invariants as named pass/fail checks.

Each check draws its own random instance from ``(seed, index)`` through an
operator factory, so a deliberately broken operator can be injected to make
sure the suite notices.
"""
from dataclasses import dataclass

import numpy as np

from .._rng import substream
from ..haar import haar_analysis, haar_synthesis
from ..linops import random_operator
from ..manifold import (
    FactorPair,
    HorizontalVector,
    balance,
    basis_dimension,
    build_basis,
    from_intrinsic,
    horizontal_project,
    metric,
    retract,
    to_intrinsic,
    transport,
    vertical_project,
)
from ..objective import Objective, PenaltyParams
from ..solvers import FactorPenaltyObjective, SolverConfig, ama_solve, rsd_solve, spectral_init


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def as_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail}


def _cvec(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def _point(rng, K, N):
    return FactorPair(_cvec(rng, K), _cvec(rng, N))


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


class _Ctx:
    def __init__(self, factory, seed, L, K, N):
        self.factory, self.seed, self.L, self.K, self.N = factory, seed, L, K, N
        self.count = 0

    def rng(self):
        self.count += 1
        return substream(self.seed, 99, self.count)

    def op(self, L=None, K=None, N=None):
        self.count += 1
        return self.factory(L or self.L, K or self.K, N or self.N, self.seed * 1000 + self.count)

    def problem(self):
        op = self.op()
        rng = self.rng()
        truth = _point(rng, self.K, self.N)
        return op, truth, op.forward(truth.h, truth.m)


# ---------------------------------------------------------------- linops


def check_adjoint_identity(ctx):
    worst = 0.0
    for _ in range(20):
        rng = ctx.rng()
        L = int(rng.integers(4, 33))
        K, N = int(rng.integers(1, L + 1)), int(rng.integers(1, 9))
        op = ctx.op(L, K, N)
        h, m, z = _cvec(rng, K), _cvec(rng, N), _cvec(rng, L)
        lhs = np.vdot(z, op.forward(h, m)).real
        rhs = np.vdot(op.adjoint(z), np.outer(h, np.conj(m))).real
        scale = np.linalg.norm(z) * np.linalg.norm(h) * np.linalg.norm(m)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst <= 1e-10, f"max scaled gap {worst:.2e}"


def check_fft_matches_dense(ctx):
    rng = ctx.rng()
    op = ctx.op(16, 5, 3)
    h, m = _cvec(rng, 5), _cvec(rng, 3)
    dense = np.diag(op.dense_B() @ np.outer(h, np.conj(m)) @ op.dense_C().conj().T)
    err = np.max(np.abs(op.forward(h, m) - dense))
    return err <= 1e-12, f"max abs error {err:.2e}"


def check_partial_dft_isometry(ctx):
    op = ctx.op(24, 7, 2)
    Bd = op.dense_B()
    err = np.max(np.abs(Bd.conj().T @ Bd - np.eye(op.K)))
    rows = np.max(np.abs(np.linalg.norm(Bd, axis=1) - np.sqrt(op.K / op.L)))
    return max(err, rows) <= 1e-12, f"B*B - I {err:.2e}, row norm error {rows:.2e}"


def check_counter_exactness(ctx):
    op, truth, y = ctx.problem()
    obj = Objective(op, y, PenaltyParams(1.0, 1.0, 1.0))
    x = _point(ctx.rng(), ctx.K, ctx.N)
    s0 = op.counters.snapshot()
    obj.cost(x)
    s1 = op.counters.snapshot()
    obj.euclidean_gradient(x)
    s2 = op.counters.snapshot()
    cost_fft, grad_fft = s1["nFFT"] - s0["nFFT"], s2["nFFT"] - s1["nFFT"]
    ok = cost_fft == 2 and grad_fft == 3 and s1["nBh"] - s0["nBh"] == 1 and s1["nCm"] - s0["nCm"] == 1
    return ok, f"cost {cost_fft} FFT, gradient after cost {grad_fft} FFT"


def check_power_method(ctx):
    op, truth, y = ctx.problem()
    x0, d = spectral_init(op, y)
    M = op.adjoint(y)
    top = np.linalg.svd(M, compute_uv=False)[0]
    return _rel(d, top) <= 1e-8, f"d {d:.6g} vs SVD {top:.6g}"


# ---------------------------------------------------------------- manifold


def check_metric_invariance(ctx):
    rng = ctx.rng()
    x = _point(rng, ctx.K, ctx.N)
    eta = horizontal_project(x, (_cvec(rng, ctx.K), _cvec(rng, ctx.N)))
    xi = horizontal_project(x, (_cvec(rng, ctx.K), _cvec(rng, ctx.N)))
    p = complex(rng.standard_normal(), rng.standard_normal())
    xp = x.act(p)
    etap = HorizontalVector(xp, eta.eta_h / p, eta.eta_m * np.conj(p))
    xip = HorizontalVector(xp, xi.eta_h / p, xi.eta_m * np.conj(p))
    r = _rel(metric(x, eta, xi), metric(xp, etap, xip))
    return r <= 1e-10, f"relative change {r:.2e}"


def check_projection_complement(ctx):
    rng = ctx.rng()
    x = _point(rng, ctx.K, ctx.N)
    v = (_cvec(rng, ctx.K), _cvec(rng, ctx.N))
    vv = vertical_project(x, v)
    hv = horizontal_project(x, v)
    sum_err = max(np.max(np.abs(vv[0] + hv.eta_h - v[0])), np.max(np.abs(vv[1] + hv.eta_m - v[1])))
    vv2 = vertical_project(x, vv)
    idem = max(np.max(np.abs(vv2[0] - vv[0])), np.max(np.abs(vv2[1] - vv[1])))
    orth = abs(metric(x, HorizontalVector(x, *vv), hv))
    scale = metric(x, HorizontalVector(x, *v), HorizontalVector(x, *v))
    ok = sum_err <= 1e-12 and idem <= 1e-10 and orth <= 1e-10 * scale
    return ok, f"sum {sum_err:.1e}, idempotence {idem:.1e}, g(Pv, Ph) {orth / scale:.1e}"


def check_basis_orthonormal(ctx):
    rng = ctx.rng()
    x = _point(rng, 2, 3)
    basis = build_basis(x)
    G = np.array([[metric(x, a, b) for b in basis] for a in basis])
    err = np.max(np.abs(G - np.eye(len(basis))))
    horiz = max(b.vertical_residual() for b in basis)
    ok = len(basis) == basis_dimension(2, 3) and err <= 1e-10 and horiz <= 1e-10
    return ok, f"{len(basis)} vectors, Gram error {err:.1e}"


def check_intrinsic_roundtrip(ctx):
    rng = ctx.rng()
    x = _point(rng, ctx.K, ctx.N)
    xi = horizontal_project(x, (_cvec(rng, ctx.K), _cvec(rng, ctx.N)))
    back = from_intrinsic(x, to_intrinsic(x, xi))
    diff = HorizontalVector(x, back.eta_h - xi.eta_h, back.eta_m - xi.eta_m)
    r = np.sqrt(metric(x, diff, diff) / metric(x, xi, xi))
    return r <= 1e-10, f"relative round-trip error {r:.1e}"


def check_transport(ctx):
    rng = ctx.rng()
    x = _point(rng, ctx.K, ctx.N)
    xi = horizontal_project(x, (_cvec(rng, ctx.K), _cvec(rng, ctx.N)))
    zero = HorizontalVector(x, np.zeros(ctx.K), np.zeros(ctx.N))
    same = transport(zero, xi)
    e0 = max(np.max(np.abs(same.eta_h - xi.eta_h)), np.max(np.abs(same.eta_m - xi.eta_m)))
    eta = horizontal_project(x, (0.1 * _cvec(rng, ctx.K), 0.1 * _cvec(rng, ctx.N)))
    moved = transport(eta, xi)
    c_err = np.max(np.abs(to_intrinsic(moved.base, moved).coords - to_intrinsic(x, xi).coords))
    ok = e0 <= 1e-12 and c_err <= 1e-10 and moved.vertical_residual() <= 1e-10
    return ok, f"zero-move error {e0:.1e}, coordinate drift {c_err:.1e}"


def check_retraction(ctx):
    rng = ctx.rng()
    x = _point(rng, ctx.K, ctx.N)
    eta = horizontal_project(x, (_cvec(rng, ctx.K), _cvec(rng, ctx.N)))
    t = 1e-5
    y = retract(x, eta * t)
    slope = np.concatenate([(y.h - x.h) / t, (y.m - x.m) / t])
    ref = np.concatenate([eta.eta_h, eta.eta_m])
    r = np.linalg.norm(slope - ref) / np.linalg.norm(ref)
    z = retract(x, eta * 0.0)
    ok = r <= 1e-6 and np.array_equal(z.h, x.h) and np.array_equal(z.m, x.m)
    return ok, f"finite-difference slope error {r:.1e}"


def check_balance(ctx):
    rng = ctx.rng()
    x = _point(rng, ctx.K, ctx.N).act(3.7 - 0.4j)
    b = balance(x)
    err = np.linalg.norm(b.product() - x.product()) / np.linalg.norm(x.product())
    nh, nm = b.norms()
    return err <= 1e-12 and _rel(nh, nm) <= 1e-12, f"product error {err:.1e}"


# ---------------------------------------------------------------- objective


def _penalized(ctx, rho=None):
    op, truth, y = ctx.problem()
    rng = ctx.rng()
    y = y + 0.3 * np.linalg.norm(y) / np.sqrt(op.L) * _cvec(rng, op.L)
    d = np.linalg.norm(truth.h) * np.linalg.norm(truth.m)
    params = PenaltyParams(rho if rho is not None else d * d, d, 0.5)
    return op, y, Objective(op, y, params), rng


def check_cost_invariance(ctx):
    op, y, obj, rng = _penalized(ctx)
    x = _point(rng, ctx.K, ctx.N)
    p = complex(rng.standard_normal(), rng.standard_normal())
    r = _rel(obj.cost(x), obj.cost(x.act(p)))
    return r <= 1e-10, f"relative change {r:.1e}"


def check_riemannian_gradient(ctx):
    op, y, obj, rng = _penalized(ctx)
    x = balance(_point(rng, ctx.K, ctx.N))
    grad = obj.riemannian_gradient(x)
    worst = 0.0
    for _ in range(6):
        eta = horizontal_project(x, (_cvec(rng, ctx.K), _cvec(rng, ctx.N)))
        t = 1e-6
        fp = obj.cost(retract(x, eta * t))
        fm = obj.cost(retract(x, eta * -t))
        fd = (fp - fm) / (2 * t)
        an = metric(x, grad, eta)
        worst = max(worst, abs(an - fd) / (1 + abs(an)))
    return worst <= 1e-5, f"max scaled error {worst:.1e} (penalty {obj.penalty_value(x):.2e})"


def check_wirtinger_half(ctx):
    op, truth, y = ctx.problem()
    rng = ctx.rng()
    d = np.linalg.norm(truth.h) * np.linalg.norm(truth.m)
    F = FactorPenaltyObjective(op, y, d * d, d, 0.5)
    x = _point(rng, ctx.K, ctx.N)
    gh, gm = F.euclidean_gradient(x.h, x.m)
    wh, wm = F.wirtinger_gradient(x.h, x.m)
    err = max(np.max(np.abs(gh - 2 * wh)), np.max(np.abs(gm - 2 * wm)))
    scale = max(np.max(np.abs(gh)), np.max(np.abs(gm)))
    return err <= 1e-12 * scale, f"relative gap {err / scale:.1e}"


def check_hessian_form(ctx):
    op, y, obj, rng = _penalized(ctx, rho=0.0)
    x = _point(rng, ctx.K, ctx.N)
    eta = horizontal_project(x, (_cvec(rng, ctx.K), _cvec(rng, ctx.N)))
    t = 1e-3
    f0 = obj.cost(x)
    fd = (obj.cost(retract(x, eta * t)) - 2 * f0 + obj.cost(retract(x, eta * -t))) / t**2
    an = obj.hessian_quadratic_form(x, eta)
    r = _rel(an, fd)
    return r <= 1e-4, f"relative error {r:.1e}"


# ---------------------------------------------------------------- solvers


def check_ama_monotone(ctx):
    op, truth, y = ctx.problem()
    rng = ctx.rng()
    rep = ama_solve(op, y, _point(rng, ctx.K, ctx.N), SolverConfig(max_iter=30))
    c = np.asarray(rep.costs)
    worst = float(np.max(np.diff(c) / c[:-1])) if c.size > 1 else 0.0
    return worst <= 1e-12, f"largest relative increase {worst:.1e} over {c.size - 1} half steps"


def check_rsd_sufficient_decrease(ctx):
    op, truth, y = ctx.problem()
    x0, d = spectral_init(op, y)
    obj = Objective(op, y, PenaltyParams.experiment(d, op.L, op.K, op.N))
    cfg = SolverConfig(max_iter=40)
    rep = rsd_solve(obj, x0, d, cfg)
    ok = True
    for k, a in enumerate(rep.steps):
        need = rep.costs[k] - cfg.armijo_c * a * rep.grad_norms[k] ** 2
        ok &= rep.costs[k + 1] <= need + 1e-12 * abs(rep.costs[k])
    counts = rep.counters
    ok &= counts["nBh"] == counts["nCm"]
    return bool(ok), f"{len(rep.steps)} steps, counters {counts}"


def check_rsd_recovers(ctx):
    op, truth, y = ctx.problem()
    x0, d = spectral_init(op, y)
    obj = Objective(op, y, PenaltyParams.experiment(d, op.L, op.K, op.N))
    rep = rsd_solve(obj, x0, d, SolverConfig(max_iter=500), truth=truth)
    return rep.reason == "converged" and rep.rmse <= 1e-6, f"{rep.reason}, RMSE {rep.rmse:.1e}"


def check_haar_roundtrip(ctx):
    rng = ctx.rng()
    img = rng.standard_normal((16, 8))
    c = haar_analysis(img)
    err = np.max(np.abs(haar_synthesis(c) - img))
    energy = _rel(np.sum(c**2), np.sum(img**2))
    return err <= 1e-12 and energy <= 1e-12, f"round trip {err:.1e}, energy {energy:.1e}"


CHECKS = {
    "adjoint_identity": check_adjoint_identity,
    "fft_matches_dense": check_fft_matches_dense,
    "partial_dft_isometry": check_partial_dft_isometry,
    "counter_exactness": check_counter_exactness,
    "power_method_vs_svd": check_power_method,
    "metric_invariance": check_metric_invariance,
    "projection_complement": check_projection_complement,
    "basis_orthonormal": check_basis_orthonormal,
    "intrinsic_roundtrip": check_intrinsic_roundtrip,
    "transport_coordinates": check_transport,
    "retraction_first_order": check_retraction,
    "balance_preserves_product": check_balance,
    "cost_quotient_invariance": check_cost_invariance,
    "riemannian_gradient_fd": check_riemannian_gradient,
    "wirtinger_half_gradient": check_wirtinger_half,
    "hessian_form_fd": check_hessian_form,
    "ama_monotone": check_ama_monotone,
    "rsd_sufficient_decrease": check_rsd_sufficient_decrease,
    "rsd_recovers": check_rsd_recovers,
    "haar_roundtrip": check_haar_roundtrip,
}


def run_check(seed=0, L=120, K=8, N=6, op_factory=random_operator):
    """Run every check; returns ``{"passed": bool, "checks": [...]}``.

    ``op_factory(L, K, N, seed)`` builds the operators under test.
    """
    ctx = _Ctx(op_factory, seed, L, K, N)
    results = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn(ctx)
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(ok), detail))
    return {"passed": all(r.passed for r in results), "checks": [r.as_dict() for r in results]}

"""Initialization and descent solvers for blind deconvolution.

* :func:`spectral_init` -- leading singular triple of ``A^*(y)`` followed by
  a coherence projection of the ``h`` factor.
* :func:`rsd_solve` -- Riemannian steepest descent on the quotient manifold
  with balancing, backtracking, and optional Barzilai-Borwein initial steps
  computed through vector transport (ROBB).
* :func:`wirtinger_solve` -- Wirtinger gradient descent on ``C^K x C^N``
  with the three-term norm/coherence penalty (NCBT / NCBB).
* :func:`ama_solve` -- alternating minimization with exact block line search.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _core
from .linops import leading_singular_triple
from .manifold import FactorPair, HorizontalVector, balance, metric, to_intrinsic
from .objective import Objective, PenaltyParams, _adjoint_sum, g0, g0_prime

log = logging.getLogger(__name__)

STEP_POLICIES = ("fixed", "backtracking", "bb_backtracking")


@dataclass
class SolverConfig:
    max_iter: int = 2000
    rel_residual_tol: float = 1e-8
    grad_ratio_tol: float | None = None
    step_policy: str = "bb_backtracking"
    fixed_step: float | None = None
    init_step: float | None = None
    shrink: float = 0.5
    armijo_c: float = 1e-4
    max_backtracks: int = 50
    record_iterates: bool = False
    checkpoints: tuple = ()

    def __post_init__(self):
        if self.step_policy not in STEP_POLICIES:
            raise ValueError(f"unknown step policy {self.step_policy!r}")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink factor must lie in (0, 1)")
        if self.rel_residual_tol is not None and self.rel_residual_tol <= 0:
            raise ValueError("rel_residual_tol must be positive")
        if self.grad_ratio_tol is not None and self.grad_ratio_tol <= 0:
            raise ValueError("grad_ratio_tol must be positive")
        if self.step_policy == "fixed" and not (self.fixed_step and self.fixed_step > 0):
            raise ValueError("fixed step policy needs a positive fixed_step")
        if self.max_iter < 0 or self.max_backtracks < 1:
            raise ValueError("iteration limits must be positive")


@dataclass
class SolverReport:
    x: FactorPair
    iterations: int
    reason: str
    residuals: list
    costs: list
    counters: dict
    rmse: float | None = None
    grad_norms: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    checkpoints: dict = field(default_factory=dict)

    @property
    def rel_residual(self):
        return self.residuals[-1]


def rmse(x, truth):
    """``||h m^* - h# m#^*||_F / (||h#|| ||m#||)``."""
    diff = x.product() - truth.product()
    return float(np.linalg.norm(diff) / (np.linalg.norm(truth.h) * np.linalg.norm(truth.m)))


# ------------------------------------------------------------------ init


def coherence_project(z, bound, op, max_iter=200, tol=1e-10):
    """Approximate ``argmin ||z' - z||`` subject to ``sqrt(L) ||B z'||_inf <= bound``.

    Dykstra's alternating projections between ``range(B)`` and the entrywise
    magnitude box in measurement space (both convex), followed by a radial
    rescale that makes the output exactly feasible. When ``B`` is square and
    unitary the clip in measurement space is already the exact projection.
    """
    if bound <= 0:
        raise ValueError("bound must be positive")
    z = np.asarray(z, dtype=np.complex128)
    cap = bound / np.sqrt(op.L)
    w0 = op.B(z)
    if np.max(np.abs(w0)) <= cap:
        return z.copy()
    scale = np.linalg.norm(w0)
    x = w0
    p = np.zeros_like(w0)
    q = np.zeros_like(w0)
    coeffs = op.Bt(w0)
    for _ in range(max_iter):
        coeffs = op.Bt(x + p)
        yv = op.B(coeffs)
        p = x + p - yv
        xn = _core.clip_magnitudes(yv + q, cap)
        q = yv + q - xn
        moved = np.linalg.norm(xn - x)
        x = xn
        if moved <= tol * scale and np.linalg.norm(yv - xn) <= tol * scale:
            break
    peak = np.sqrt(op.L) * np.max(np.abs(op.B(coeffs)))
    if peak > bound:
        coeffs = coeffs * (bound / peak)
    return coeffs


def spectral_init(op, y, mu=None, seed=0, tol=1e-10, max_iter=500):
    """Spectral initialization with coherence projection.

    Returns the balanced starting pair and the leading singular value ``d``
    of ``A^*(y)``.
    """
    d, u, v = leading_singular_triple(op, y, tol=tol, max_iter=max_iter, seed=seed)
    return init_from_triple(op, d, u, v, mu), d


def init_from_triple(op, d, u, v, mu=None):
    """Scale a singular triple by ``sqrt(d)``, project ``h`` and balance."""
    if mu is None:
        mu = PenaltyParams.default_mu(op.L, op.K, op.N)
    sd = np.sqrt(d)
    h0 = coherence_project(sd * u, 2.0 * sd * mu, op)
    return balance(FactorPair(h0, sd * v))


# ------------------------------------------------------------------ BB step


def bb_step(s, yv, fallback, cap=np.inf):
    """Barzilai-Borwein step ``<s, y> / <y, y>`` with safeguards.

    ``s`` and ``yv`` are real coordinate vectors (intrinsic coordinates, or a
    real view of the ambient vectors). ``fallback`` is returned when the
    denominator is below ``1e-30`` or the quotient is nonpositive or above
    ``cap``.
    """
    yy = float(yv @ yv)
    if yy <= 1e-30:
        return fallback
    a = float(s @ yv) / yy
    if not np.isfinite(a) or a <= 0.0 or a > cap:
        return fallback
    return a


def bb_initial_step(x_k, grad_k, eta_k, x_next, grad_next, fallback, cap=np.inf):
    """BB step on the manifold from two successive iterates.

    ``s = T_eta eta`` and ``y = grad_next - T_eta grad_k``; since the transport
    is the identity on intrinsic coordinates, both inner products are plain
    dot products of coordinate vectors. ``x_next`` may be any positive real
    rescaling of ``retract(x_k, eta_k)`` (for example its balanced version).
    """
    ck = to_intrinsic(x_k, grad_k).coords
    s = to_intrinsic(x_k, eta_k).coords
    yv = to_intrinsic(x_next, grad_next).coords - ck
    return bb_step(s, yv, fallback, cap)


# ------------------------------------------------------------------ ROBB


def rsd_solve(objective, x0, d, config=None, truth=None):
    """Riemannian steepest descent on ``C*^K x C*^N / C*``.

    Every iteration balances the representative, takes the Riemannian
    gradient ``(grad_h f / ||m||^2, grad_m f / ||h||^2)`` and moves by
    ordinary addition with a step chosen by the configured policy.
    """
    cfg = config or SolverConfig()
    obj = objective
    counters = obj.op.counters
    snap = counters.snapshot()
    cap = 1e6 / d

    x = obj.rebalance(balance(x0))
    f = obj.cost(x)
    residuals, costs, grad_norms, steps, iterates = [], [f], [], [], []
    checkpoints = {}
    grad0 = None
    prev_c = None
    prev_step = alpha = cfg.init_step if cfg.init_step is not None else 1.0 / d
    reason = "max_iter"
    k = 0
    while True:
        rel = obj.relative_residual(x)
        residuals.append(rel)
        if cfg.record_iterates:
            iterates.append(x)
        if k in cfg.checkpoints:
            checkpoints[k] = (x, rel, counters.since(snap))
        if cfg.rel_residual_tol is not None and rel <= cfg.rel_residual_tol:
            reason = "converged"
            break
        if k >= cfg.max_iter:
            break
        xi = obj.riemannian_gradient(x)
        gn2 = metric(x, xi, xi)
        gnorm = np.sqrt(gn2)
        grad_norms.append(gnorm)
        if gn2 == 0.0:
            reason = "stationary"
            break
        if cfg.grad_ratio_tol is not None:
            if grad0 is None:
                grad0 = gnorm
            elif gnorm <= cfg.grad_ratio_tol * grad0:
                reason = "gradient"
                break

        if cfg.step_policy == "fixed":
            alpha = cfg.fixed_step
        elif cfg.step_policy == "backtracking":
            alpha = cfg.init_step if cfg.init_step is not None else 1.0 / d
        else:
            c_grad = to_intrinsic(x, xi).coords
            if prev_c is None:
                alpha = prev_step
            else:
                s = -prev_step * prev_c
                alpha = bb_step(s, c_grad - prev_c, prev_step, cap)

        accepted = False
        for _ in range(cfg.max_backtracks):
            x_new = FactorPair(x.h - alpha * xi.eta_h, x.m - alpha * xi.eta_m)
            f_new = obj.cost(x_new)
            if cfg.step_policy == "fixed" or f_new <= f - cfg.armijo_c * alpha * gn2:
                accepted = True
                break
            alpha *= cfg.shrink
        if not accepted:
            reason = "stalled"
            obj.cost(x)
            break
        if cfg.step_policy == "bb_backtracking":
            prev_c = c_grad
        prev_step = alpha
        steps.append(alpha)
        costs.append(f_new)
        x = obj.rebalance(x_new)
        f = f_new
        k += 1

    log.debug("rsd_solve: %s after %d iterations, relres %.3e", reason, k, residuals[-1])
    return SolverReport(
        x=x,
        iterations=k,
        reason=reason,
        residuals=residuals,
        costs=costs,
        counters=counters.since(snap),
        rmse=rmse(x, truth) if truth is not None else None,
        grad_norms=grad_norms,
        steps=steps,
        iterates=iterates,
        checkpoints=checkpoints,
    )


# ------------------------------------------------------------------ NCBT / NCBB


class FactorPenaltyObjective:
    """``F(h, m) = ||y - A(h m^*)||^2 + G(h, m)`` on ``C^K x C^N`` with

    ``G = rho [G0(||h||^2 / 2d) + G0(||m||^2 / 2d) + sum_i G0(L |b_i^* h|^2 / (8 d mu^2))]``.
    """

    def __init__(self, op, y, rho, d, mu):
        self.op = op
        self.y = np.asarray(y, dtype=np.complex128)
        self.rho, self.d, self.mu = float(rho), float(d), float(mu)
        self.scale = op.L / (8.0 * d * mu * mu)
        self.y_norm = float(np.linalg.norm(self.y))
        self._key = None

    def _evaluate(self, h, m):
        key = self._key
        if key is not None and (key[0] is h or np.array_equal(key[0], h)) and (
            key[1] is m or np.array_equal(key[1], m)
        ):
            return
        bh = self.op.B(h)
        cm = self.op.C(m)
        r, data = _core.residual(bh, cm, self.y)
        pen, g0p = 0.0, None
        if self.rho > 0:
            coh, g0p = _core.penalty_terms(bh, self.scale)
            th = np.vdot(h, h).real / (2.0 * self.d)
            tm = np.vdot(m, m).real / (2.0 * self.d)
            pen = self.rho * (float(g0(th)) + float(g0(tm)) + coh)
            self._gh_norm = float(g0_prime(th))
            self._gm_norm = float(g0_prime(tm))
        self._key = (h, m)
        self._bh, self._cm, self._r, self._data, self._pen, self._g0p = bh, cm, r, data, pen, g0p

    def cost(self, h, m):
        self._evaluate(h, m)
        return self._data + self._pen

    def relative_residual(self, h, m):
        self._evaluate(h, m)
        return np.sqrt(self._data) / self.y_norm

    def euclidean_gradient(self, h, m):
        """Gradient w.r.t. the real inner product ``Re <., .>``."""
        self._evaluate(h, m)
        op, r, bh, cm = self.op, self._r, self._bh, self._cm
        gm = op.Ct(2.0 * np.conj(r) * bh)
        if self.rho == 0:
            return op.Bt(2.0 * r * cm), gm
        gh = _adjoint_sum(op, 2.0 * r * cm, (2.0 * self.rho * self.scale) * self._g0p * bh)
        gh = gh + (self.rho * self._gh_norm / self.d) * h
        gm = gm + (self.rho * self._gm_norm / self.d) * m
        return gh, gm

    def wirtinger_gradient(self, h, m):
        """``(dF/d conj(h), dF/d conj(m))``."""
        self._evaluate(h, m)
        op, r, bh, cm = self.op, self._r, self._bh, self._cm
        wm = op.Ct(np.conj(r) * bh)
        if self.rho == 0:
            return op.Bt(r * cm), wm
        wh = _adjoint_sum(op, r * cm, (self.rho * self.scale) * self._g0p * bh)
        wh = wh + (self.rho * self._gh_norm / (2.0 * self.d)) * h
        wm = wm + (self.rho * self._gm_norm / (2.0 * self.d)) * m
        return wh, wm


def _rdot(a, b):
    return float(np.vdot(a, b).real)


def wirtinger_solve(op, y, x0, d, mu, config=None, variant="bb", rho=None, truth=None):
    """Wirtinger gradient descent ``(h, m) <- (h, m) - alpha grad^w F``.

    ``variant="fixed"`` restarts backtracking from ``1/d`` every iteration
    (NCBT); ``variant="bb"`` uses a Euclidean BB initial step (NCBB).
    ``rho`` defaults to ``d^2 / 100``.
    """
    if variant not in ("fixed", "bb"):
        raise ValueError("variant must be 'fixed' or 'bb'")
    cfg = config or SolverConfig()
    rho = d * d / 100.0 if rho is None else rho
    F = FactorPenaltyObjective(op, y, rho, d, mu)
    counters = op.counters
    snap = counters.snapshot()
    h, m = x0.h.copy(), x0.m.copy()
    f = F.cost(h, m)
    residuals, costs, grad_norms, steps = [], [f], [], []
    checkpoints = {}
    grad0 = None
    prev = None
    alpha0 = cfg.init_step if cfg.init_step is not None else 1.0 / d
    prev_step = alpha0
    reason = "max_iter"
    k = 0
    while True:
        rel = F.relative_residual(h, m)
        residuals.append(rel)
        if k in cfg.checkpoints:
            checkpoints[k] = (FactorPair(h, m), rel, counters.since(snap))
        if cfg.rel_residual_tol is not None and rel <= cfg.rel_residual_tol:
            reason = "converged"
            break
        if k >= cfg.max_iter:
            break
        wh, wm = F.wirtinger_gradient(h, m)
        wn2 = _rdot(wh, wh) + _rdot(wm, wm)
        grad_norms.append(np.sqrt(wn2))
        if wn2 == 0.0:
            reason = "stationary"
            break
        if cfg.grad_ratio_tol is not None:
            if grad0 is None:
                grad0 = np.sqrt(wn2)
            elif np.sqrt(wn2) <= cfg.grad_ratio_tol * grad0:
                reason = "gradient"
                break
        if cfg.step_policy == "fixed":
            alpha = cfg.fixed_step
        elif variant == "fixed" or prev is None:
            alpha = alpha0
        else:
            sh, sm, dwh, dwm = prev[0], prev[1], wh - prev[2], wm - prev[3]
            yy = _rdot(dwh, dwh) + _rdot(dwm, dwm)
            sy = _rdot(sh, dwh) + _rdot(sm, dwm)
            alpha = prev_step if yy <= 1e-30 or sy <= 0 or sy / yy > 1e6 / d else sy / yy
        accepted = False
        for _ in range(cfg.max_backtracks):
            hn, mn = h - alpha * wh, m - alpha * wm
            fn = F.cost(hn, mn)
            # directional derivative of F along -alpha * grad^w is -2 alpha ||grad^w||^2
            if cfg.step_policy == "fixed" or fn <= f - cfg.armijo_c * 2.0 * alpha * wn2:
                accepted = True
                break
            alpha *= cfg.shrink
        if not accepted:
            reason = "stalled"
            F.cost(h, m)
            break
        prev = (hn - h, mn - m, wh, wm)
        prev_step = alpha
        steps.append(alpha)
        costs.append(fn)
        h, m, f = hn, mn, fn
        k += 1

    x = FactorPair(h, m)
    return SolverReport(
        x=x,
        iterations=k,
        reason=reason,
        residuals=residuals,
        costs=costs,
        counters=counters.since(snap),
        rmse=rmse(x, truth) if truth is not None else None,
        grad_norms=grad_norms,
        steps=steps,
        checkpoints=checkpoints,
    )


# ------------------------------------------------------------------ AMA


def ama_solve(op, y, x0, config=None, truth=None):
    """Alternating minimization of ``||y - A(h m^*)||^2`` with exact block steps.

    Each block step moves along the negative block gradient ``g`` by
    ``t = ||g||^2 / (2 ||A(h g^*)||^2)`` (resp. ``A(g m^*)``), the minimizer
    of the quadratic restriction. ``costs`` holds the objective after every
    half step.
    """
    cfg = config or SolverConfig()
    y = np.asarray(y, dtype=np.complex128)
    y_norm = float(np.linalg.norm(y))
    counters = op.counters
    snap = counters.snapshot()
    h, m = x0.h.copy(), x0.m.copy()
    bh, cm = op.B(h), op.C(m)
    r, data = _core.residual(bh, cm, y)
    residuals, costs, checkpoints = [], [data], {}
    reason = "max_iter"
    k = 0
    while True:
        rel = np.sqrt(data) / y_norm
        residuals.append(rel)
        if k in cfg.checkpoints:
            checkpoints[k] = (FactorPair(h, m), rel, counters.since(snap))
        if cfg.rel_residual_tol is not None and rel <= cfg.rel_residual_tol:
            reason = "converged"
            break
        if k >= cfg.max_iter:
            break
        moved = False
        # m block: h fixed
        gm = op.Ct(2.0 * np.conj(r) * bh)
        gg = _rdot(gm, gm)
        if gg > 0:
            cg = op.C(gm)
            q = bh * np.conj(cg)
            qq = _rdot(q, q)
            if qq > 0:
                t = gg / (2.0 * qq)
                m = m - t * gm
                cm = cm - t * cg
                moved = True
        r, data = _core.residual(bh, cm, y)
        costs.append(data)
        # h block: m fixed
        gh = op.Bt(2.0 * r * cm)
        gg = _rdot(gh, gh)
        if gg > 0:
            bg = op.B(gh)
            q = bg * np.conj(cm)
            qq = _rdot(q, q)
            if qq > 0:
                t = gg / (2.0 * qq)
                h = h - t * gh
                bh = bh - t * bg
                moved = True
        r, data = _core.residual(bh, cm, y)
        costs.append(data)
        if not moved:
            reason = "stationary"
            break
        k += 1

    x = FactorPair(h, m)
    return SolverReport(
        x=x,
        iterations=k,
        reason=reason,
        residuals=residuals,
        costs=costs,
        counters=counters.since(snap),
        rmse=rmse(x, truth) if truth is not None else None,
        checkpoints=checkpoints,
    )


def riemannian_step_projected(objective, x, alpha):
    """One step ``x - alpha P^h(grad_h f / ||m||^2, grad_m f / ||h||^2)`` at any representative."""
    from .manifold import horizontal_project

    gh, gm = objective.euclidean_gradient(x)
    nh2 = np.vdot(x.h, x.h).real
    nm2 = np.vdot(x.m, x.m).real
    xi = horizontal_project(x, (gh / nm2, gm / nh2))
    return FactorPair(x.h - alpha * xi.eta_h, x.m - alpha * xi.eta_m)


def riemannian_step_balanced(objective, x, alpha):
    """One step ``x - (alpha / d_k) grad f`` after balancing, ``d_k = ||h|| ||m||``."""
    xb = balance(x)
    nh, nm = xb.norms()
    gh, gm = objective.euclidean_gradient(xb)
    dk = nh * nm
    return FactorPair(xb.h - (alpha / dk) * gh, xb.m - (alpha / dk) * gm)


__all__ = [
    "SolverConfig",
    "SolverReport",
    "HorizontalVector",
    "Objective",
    "ama_solve",
    "bb_initial_step",
    "bb_step",
    "coherence_project",
    "init_from_triple",
    "rmse",
    "rsd_solve",
    "spectral_init",
    "wirtinger_solve",
    "FactorPenaltyObjective",
    "riemannian_step_balanced",
    "riemannian_step_projected",
]

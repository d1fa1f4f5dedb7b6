"""Penalized least-squares cost on the quotient manifold.

``f(h, m) = ||y - A(h m^*)||^2 + G(h, m)`` with the coherence penalty

    G = rho * sum_i G0(L |b_i^* h|^2 ||m||^2 / (8 d^2 mu^2)),
    G0(t) = max(t - 1, 0)^2.

Both terms depend on ``(h, m)`` only through the class ``h m^*``.
"""
from dataclasses import dataclass

import numpy as np

from . import _core
from .manifold import FactorPair, HorizontalVector, is_balanced


class ContractViolation(ValueError):
    """An input violates an operation's precondition."""


def g0(t):
    e = np.maximum(np.asarray(t, dtype=float) - 1.0, 0.0)
    return e * e


def g0_prime(t):
    return 2.0 * np.maximum(np.asarray(t, dtype=float) - 1.0, 0.0)


@dataclass(frozen=True)
class PenaltyParams:
    rho: float
    d: float
    mu: float

    def __post_init__(self):
        if not self.rho >= 0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")
        if not self.d > 0:
            raise ValueError(f"d must be > 0, got {self.d}")
        if not self.mu > 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")

    @staticmethod
    def default_mu(L, K, N):
        return 6.0 * np.sqrt(L / (K + N)) / np.log(L)

    @classmethod
    def experiment(cls, d, L, K, N):
        """``rho = d^2 / 100``, ``mu = 6 sqrt(L / (K + N)) / log L``."""
        return cls(rho=d * d / 100.0, d=d, mu=cls.default_mu(L, K, N))

    @classmethod
    def theory(cls, d, mu, noise_norm2=0.0):
        """``rho = d^2 + 2.5 ||e||^2``, the regime covered by the convergence theory."""
        return cls(rho=d * d + 2.5 * noise_norm2, d=d, mu=mu)

    def coherence_scale(self, L):
        """Factor ``L / (8 d^2 mu^2)`` in the penalty argument."""
        return L / (8.0 * self.d**2 * self.mu**2)


def coherence(op, h):
    """``sqrt(L) ||B h||_inf / ||h||``."""
    return np.sqrt(op.L) * np.max(np.abs(op.B(h))) / np.linalg.norm(h)


class Objective:
    """Cost, gradients and curvature of ``f`` for fixed data ``(A, y)``.

    The instance caches ``B h``, ``C m`` and the residual of the most recent
    cost evaluation so a gradient at the same point costs only the adjoint
    transforms. Give each solver its own instance.
    """

    def __init__(self, op, y, penalty=None):
        y = np.asarray(y, dtype=np.complex128)
        if y.shape != (op.L,):
            raise ValueError(f"y must have length {op.L}")
        self.op = op
        self.y = y
        self.penalty = penalty if penalty is not None and penalty.rho > 0 else None
        self.y_norm = float(np.linalg.norm(y))
        self._x = None

    # ------------------------------------------------------------- evaluation
    def _lookup(self, x):
        c = self._x
        if c is None:
            return False
        if c is x:
            return True
        return np.array_equal(c.h, x.h) and np.array_equal(c.m, x.m)

    def _evaluate(self, x):
        if self._lookup(x):
            return
        op = self.op
        bh = op.B(x.h)
        cm = op.C(x.m)
        r, data = _core.residual(bh, cm, self.y)
        pen, g0p, pscale = 0.0, None, 0.0
        if self.penalty is not None:
            pscale = self.penalty.coherence_scale(op.L) * np.vdot(x.m, x.m).real
            pen, g0p = _core.penalty_terms(bh, pscale)
            pen *= self.penalty.rho
        self._x = x
        self._bh, self._cm, self._r = bh, cm, r
        self._data, self._pen, self._g0p, self._pscale = data, pen, g0p, pscale

    def cost(self, x):
        self._evaluate(x)
        return self._data + self._pen

    def data_misfit(self, x):
        """``||y - A(h m^*)||^2`` (no penalty)."""
        self._evaluate(x)
        return self._data

    def relative_residual(self, x):
        self._evaluate(x)
        return np.sqrt(self._data) / self.y_norm

    def penalty_value(self, x):
        self._evaluate(x)
        return self._pen

    def residual(self, x):
        """``A(h m^*) - y``."""
        self._evaluate(x)
        return self._r

    def euclidean_gradient(self, x):
        """``(grad_h f, grad_m f)`` w.r.t. ``Re <., .>``."""
        self._evaluate(x)
        op, r, bh, cm = self.op, self._r, self._bh, self._cm
        data_h = 2.0 * r * cm
        gm = op.Ct(2.0 * np.conj(r) * bh)
        if self.penalty is None:
            return op.Bt(data_h), gm
        w = self._g0p
        coef = 2.0 * self.penalty.rho * self._pscale
        # data and penalty parts go through separate transforms, one truncation
        gh = _adjoint_sum(op, data_h, coef * w * bh)
        if self._pscale > 0:
            gm = gm + (coef / np.vdot(x.m, x.m).real) * float(w @ (bh.real**2 + bh.imag**2)) * x.m
        return gh, gm

    def riemannian_gradient(self, x, rtol=1e-12):
        """Horizontal lift of the Riemannian gradient at a balanced ``x``."""
        if not is_balanced(x, rtol):
            raise ContractViolation("riemannian_gradient needs ||h|| == ||m||; balance first")
        gh, gm = self.euclidean_gradient(x)
        nh2 = np.vdot(x.h, x.h).real
        nm2 = np.vdot(x.m, x.m).real
        return HorizontalVector(x, gh / nm2, gm / nh2)

    def rebalance(self, x):
        """Balanced representative of ``x``, carrying over a cached evaluation."""
        nh, nm = x.norms()
        s = np.sqrt(nh * nm)
        sh, sm = s / nh, s / nm
        xb = FactorPair(x.h * sh, x.m * sm)
        if self._lookup(x):
            self._x = xb
            self._bh = self._bh * sh
            self._cm = self._cm * sm
            self._pscale = self._pscale * sm * sm
        return xb

    def hessian_quadratic_form(self, x, eta):
        """``d^2/dt^2 ||y - A((h + t eta_h)(m + t eta_m)^*)||^2`` at ``t = 0``.

        Data-fit term only:
        ``2 ||A(eta_h m^* + h eta_m^*)||^2 + 4 Re <A(h m^*) - y, A(eta_h eta_m^*)>``.
        """
        self._evaluate(x)
        op = self.op
        beh = op.B(eta.eta_h)
        cem = op.C(eta.eta_m)
        first = beh * np.conj(self._cm) + self._bh * np.conj(cem)
        second = beh * np.conj(cem)
        return float(2.0 * np.vdot(first, first).real + 4.0 * np.vdot(self._r, second).real)


def _adjoint_sum(op, v1, v2):
    """``B^* v1 + B^* v2`` counted as one ``B^*`` multiplication and two transforms."""
    b = op.b
    op.counters.add(nBh=1, nFFT=2)
    return b.adjoint(v1) + b.adjoint(v2)

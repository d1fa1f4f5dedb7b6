"""Geometry of the rank-one quotient manifold ``C*^K x C*^N / C*``.

A point is represented by a pair ``(h, m)``; the pairs ``(h p^{-1}, m p^*)``
for nonzero complex ``p`` all represent the same point ``h m^*``. Tangent
vectors are stored extrinsically as two complex vectors anchored at a
representative, and converted to real intrinsic coordinates in an
orthonormal basis of the horizontal space on demand.
"""
from dataclasses import dataclass

import numpy as np

_SQRT2 = np.sqrt(2.0)


class LeftManifoldError(ValueError):
    """A factor became zero, so the pair is no longer on the manifold."""


class BaseMismatchError(ValueError):
    """Tangent vectors anchored at different representatives were combined."""


@dataclass(frozen=True, eq=False)
class FactorPair:
    """Representative ``(h, m)`` of the point ``h m^*``."""

    h: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.complex128)
        m = np.asarray(self.m, dtype=np.complex128)
        if h.ndim != 1 or m.ndim != 1:
            raise ValueError("h and m must be 1-D")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(m))):
            raise ValueError("h and m must be finite")
        if not np.any(h) or not np.any(m):
            raise LeftManifoldError("h and m must both be nonzero")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "m", m)

    @property
    def K(self):
        return self.h.shape[0]

    @property
    def N(self):
        return self.m.shape[0]

    def product(self):
        """Dense rank-one matrix ``h m^*``."""
        return np.outer(self.h, np.conj(self.m))

    def act(self, p):
        """Group action ``(h, m) . p = (h / p, m conj(p))``."""
        return FactorPair(self.h / p, self.m * np.conj(p))

    def norms(self):
        return np.linalg.norm(self.h), np.linalg.norm(self.m)


@dataclass(frozen=True, eq=False)
class HorizontalVector:
    """Tangent direction ``(eta_h, eta_m)`` anchored at ``base``."""

    base: FactorPair
    eta_h: np.ndarray
    eta_m: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eta_h", np.asarray(self.eta_h, dtype=np.complex128))
        object.__setattr__(self, "eta_m", np.asarray(self.eta_m, dtype=np.complex128))
        if self.eta_h.shape != self.base.h.shape or self.eta_m.shape != self.base.m.shape:
            raise ValueError("tangent components do not match the base dimensions")

    def _check(self, other):
        _require_same_base(self.base, other.base)

    def __add__(self, other):
        self._check(other)
        return HorizontalVector(self.base, self.eta_h + other.eta_h, self.eta_m + other.eta_m)

    def __sub__(self, other):
        self._check(other)
        return HorizontalVector(self.base, self.eta_h - other.eta_h, self.eta_m - other.eta_m)

    def __mul__(self, s):
        return HorizontalVector(self.base, s * self.eta_h, s * self.eta_m)

    __rmul__ = __mul__

    def __neg__(self):
        return HorizontalVector(self.base, -self.eta_h, -self.eta_m)

    def vertical_residual(self):
        """Magnitude of the vertical part, ``|Lambda|``; zero when horizontal."""
        return abs(_vertical_coefficient(self.base, self.eta_h, self.eta_m))

    def is_horizontal(self, tol=1e-10):
        return self.vertical_residual() <= tol


@dataclass(frozen=True, eq=False)
class IntrinsicCoords:
    """Real coordinates of a horizontal vector in the basis of :func:`build_basis`."""

    coords: np.ndarray
    base: FactorPair


def _require_same_base(a, b):
    if a is b:
        return
    if a.h.shape != b.h.shape or a.m.shape != b.m.shape:
        raise BaseMismatchError("tangent vectors live at different points")
    if not (np.array_equal(a.h, b.h) and np.array_equal(a.m, b.m)):
        raise BaseMismatchError("tangent vectors live at different points")


# ---------------------------------------------------------------- metric


def metric(x, eta, xi):
    """``Re(eta_h^* xi_h) ||m||^2 + Re(eta_m^* xi_m) ||h||^2``."""
    _require_same_base(x, eta.base)
    _require_same_base(x, xi.base)
    return _metric(x, eta.eta_h, eta.eta_m, xi.eta_h, xi.eta_m)


def _metric(x, ah, am, bh, bm):
    nh2 = np.vdot(x.h, x.h).real
    nm2 = np.vdot(x.m, x.m).real
    return float(np.vdot(ah, bh).real * nm2 + np.vdot(am, bm).real * nh2)


def norm(x, eta):
    return np.sqrt(metric(x, eta, eta))


# ---------------------------------------------------------------- projections


def _vertical_coefficient(x, vh, vm):
    h, m = x.h, x.m
    return 0.5 * (np.vdot(vm, m) / np.vdot(m, m) - np.vdot(h, vh) / np.vdot(h, h))


def vertical_project(x, v):
    """Orthogonal projection of the tangent pair ``v = (v_h, v_m)`` onto the
    vertical space ``{(-h lam, m conj(lam))}``. Returns a pair of arrays."""
    vh, vm = (v.eta_h, v.eta_m) if isinstance(v, HorizontalVector) else v
    lam = _vertical_coefficient(x, vh, vm)
    return -x.h * lam, x.m * np.conj(lam)


def horizontal_project(x, v):
    """``v - P^v(v)`` as a :class:`HorizontalVector` at ``x``."""
    vh, vm = (v.eta_h, v.eta_m) if isinstance(v, HorizontalVector) else v
    ph, pm = vertical_project(x, (vh, vm))
    return HorizontalVector(x, vh - ph, vm - pm)


# ---------------------------------------------------------------- retraction


def retract(x, eta):
    """``(h + eta_h, m + eta_m)``."""
    _require_same_base(x, eta.base)
    h = x.h + eta.eta_h
    m = x.m + eta.eta_m
    if not np.any(h) or not np.any(m):
        raise LeftManifoldError("retraction produced a zero factor")
    return FactorPair(h, m)


def balance(x):
    """Representative with ``||h|| = ||m|| = sqrt(||h|| ||m||)``."""
    nh, nm = x.norms()
    s = np.sqrt(nh * nm)
    return FactorPair(x.h * (s / nh), x.m * (s / nm))


def is_balanced(x, rtol=1e-12):
    nh, nm = x.norms()
    return abs(nh - nm) <= rtol * max(nh, nm)


# ---------------------------------------------------------------- basis


class _PerpFrame:
    """Orthonormal complement of a nonzero vector ``a`` via a Householder reflector.

    ``P = phase * H[:, 1:]`` where ``H = I - 2 v v^* / ||v||^2``,
    ``v = a + phase ||a|| e_1`` and ``phase = a_1 / |a_1|`` (1 if ``a_1 = 0``).
    The phase factor makes the frame rotate with ``a`` under ``a -> a q``,
    ``|q| = 1``, which keeps the basis equivariant under the group action.
    """

    __slots__ = ("v", "vnorm2", "phase")

    def __init__(self, a):
        a1 = a[0]
        self.phase = a1 / abs(a1) if a1 != 0 else 1.0 + 0.0j
        v = a.copy()
        v[0] += self.phase * np.linalg.norm(a)
        self.v = v
        self.vnorm2 = np.vdot(v, v).real

    def _reflect(self, w):
        return w - (2.0 * np.vdot(self.v, w) / self.vnorm2) * self.v

    def coords(self, w):
        """``P^* w`` (length ``n - 1``)."""
        return np.conj(self.phase) * self._reflect(w)[1:]

    def expand(self, z):
        """``P z`` (length ``n``)."""
        w = np.empty(z.shape[0] + 1, dtype=np.complex128)
        w[0] = 0.0
        w[1:] = z
        return self.phase * self._reflect(w)


def basis_dimension(K, N):
    return 2 * (K + N) - 2


def to_intrinsic(x, xi):
    """Coordinates ``[g(e_i, xi)]`` in the orthonormal horizontal basis.

    Ordering: the two ``(h, m)``-direction vectors, then the real and
    imaginary ``h_perp`` blocks, then the real and imaginary ``m_perp``
    blocks.
    """
    _require_same_base(x, xi.base)
    h, m = x.h, x.m
    nh, nm = x.norms()
    a = np.vdot(h, xi.eta_h)
    b = np.vdot(m, xi.eta_m)
    rh, rm = nm / nh, nh / nm
    c = np.empty(basis_dimension(x.K, x.N))
    c[0] = (a.real * rh + b.real * rm) / _SQRT2
    c[1] = (a.imag * rh - b.imag * rm) / _SQRT2
    k1, n1 = x.K - 1, x.N - 1
    if k1:
        wh = _PerpFrame(h).coords(xi.eta_h)
        c[2 : 2 + k1] = nm * wh.real
        c[2 + k1 : 2 + 2 * k1] = nm * wh.imag
    if n1:
        wm = _PerpFrame(m).coords(xi.eta_m)
        o = 2 + 2 * k1
        c[o : o + n1] = nh * wm.real
        c[o + n1 : o + 2 * n1] = nh * wm.imag
    return IntrinsicCoords(c, x)


def from_intrinsic(x, c):
    """Horizontal vector at ``x`` with intrinsic coordinates ``c``."""
    if isinstance(c, IntrinsicCoords):
        c = c.coords
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (basis_dimension(x.K, x.N),):
        raise ValueError(f"expected {basis_dimension(x.K, x.N)} coordinates, got {c.shape}")
    h, m = x.h, x.m
    nh, nm = x.norms()
    s = 1.0 / (_SQRT2 * nh * nm)
    eta_h = (c[0] + 1j * c[1]) * s * h
    eta_m = (c[0] - 1j * c[1]) * s * m
    k1, n1 = x.K - 1, x.N - 1
    if k1:
        z = c[2 : 2 + k1] + 1j * c[2 + k1 : 2 + 2 * k1]
        eta_h = eta_h + _PerpFrame(h).expand(z) / nm
    if n1:
        o = 2 + 2 * k1
        z = c[o : o + n1] + 1j * c[o + n1 : o + 2 * n1]
        eta_m = eta_m + _PerpFrame(m).expand(z) / nh
    return HorizontalVector(x, eta_h, eta_m)


def build_basis(x):
    """The ``2(K+N) - 2`` orthonormal horizontal basis vectors at ``x``."""
    n = basis_dimension(x.K, x.N)
    eye = np.eye(n)
    return [from_intrinsic(x, eye[i]) for i in range(n)]


def transport(eta_move, xi):
    """Vector transport by parallelization along ``eta_move``.

    Identity on intrinsic coordinates: the result at
    ``retract(base, eta_move)`` has the coordinates ``xi`` has at ``base``.
    """
    x = eta_move.base
    _require_same_base(x, xi.base)
    y = retract(x, eta_move)
    return from_intrinsic(y, to_intrinsic(x, xi))

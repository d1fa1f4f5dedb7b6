"""Measurement operator ``A(h m^*) = diag(B h m^* C^*)`` and its adjoint.

``B`` acts through unitary FFTs (first ``K`` DFT columns, or DFT columns on
a 2-D support mask) and ``C`` is either a dense complex Gaussian matrix or a
Haar-wavelet subspace seen through the conjugate DFT. Every application of
``B``, ``B^*``, ``C`` or ``C^*`` is tallied in :class:`Counters`:

* ``nBh`` / ``nCm`` count multiplications by ``B`` / ``C`` (or adjoints),
* ``nFFT`` counts Fourier transforms. A dense ``C`` counts one transform per
  application, following the time-domain accounting where the Fourier-domain
  ``C`` is a DFT of a time-domain matrix.
"""
import threading
from dataclasses import dataclass, field

import numpy as np

from ._rng import substream
from .haar import haar_analysis, haar_synthesis


class DimensionError(ValueError):
    """Raised for inconsistent operator or vector dimensions."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative method exhausts its iteration budget.

    The best iterate found is kept in ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass
class Counters:
    nBh: int = 0
    nCm: int = 0
    nFFT: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add(self, nBh=0, nCm=0, nFFT=0):
        with self._lock:
            self.nBh += nBh
            self.nCm += nCm
            self.nFFT += nFFT

    def snapshot(self):
        return {"nBh": self.nBh, "nCm": self.nCm, "nFFT": self.nFFT}

    def since(self, snap):
        return {k: v - snap[k] for k, v in self.snapshot().items()}


def _as_vector(x, n, name):
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1 or x.shape[0] != n:
        raise DimensionError(f"{name}: expected length {n}, got shape {x.shape}")
    return x


# ---------------------------------------------------------------- B factors


class PartialDFT:
    """First ``K`` columns of the unitary ``L x L`` DFT matrix."""

    def __init__(self, L, K):
        if not 1 <= K <= L:
            raise DimensionError(f"need 1 <= K <= L, got K={K}, L={L}")
        self.L, self.K = int(L), int(K)

    def apply(self, h):
        return np.fft.fft(h, n=self.L, norm="ortho")

    def adjoint(self, v):
        # works column-wise on (L, n) arrays too
        return np.fft.ifft(v, axis=0, norm="ortho")[: self.K]

    def dense(self):
        return np.fft.fft(np.eye(self.L), axis=0, norm="ortho")[:, : self.K]


class SupportDFT:
    """Columns of the unitary 2-D DFT indexed by a support mask.

    Grid vectors are flattened column-major. ``support`` holds the flat
    indices of the mask in that ordering.
    """

    def __init__(self, shape, support):
        self.shape = tuple(int(s) for s in shape)
        self.L = self.shape[0] * self.shape[1]
        support = np.asarray(support, dtype=np.intp).ravel()
        if support.size == 0:
            raise DimensionError("empty support")
        if support.min() < 0 or support.max() >= self.L or np.unique(support).size != support.size:
            raise DimensionError("support indices must be distinct and inside the grid")
        self.support = support
        self.K = support.size

    @classmethod
    def from_mask(cls, mask):
        mask = np.asarray(mask, dtype=bool)
        return cls(mask.shape, np.flatnonzero(mask.ravel(order="F")))

    def apply(self, h):
        img = np.zeros(self.L, dtype=np.complex128)
        img[self.support] = h
        img = img.reshape(self.shape, order="F")
        return np.fft.fft2(img, norm="ortho").ravel(order="F")

    def adjoint(self, v):
        if v.ndim == 1:
            grid = np.fft.ifft2(v.reshape(self.shape, order="F"), norm="ortho")
            return grid.ravel(order="F")[self.support]
        grid = v.reshape(self.shape + (v.shape[1],), order="F")
        grid = np.fft.ifft2(grid, axes=(0, 1), norm="ortho")
        return grid.reshape(self.L, v.shape[1], order="F")[self.support]

    def dense(self):
        eye = np.zeros((self.L, self.K), dtype=np.complex128)
        eye[self.support, np.arange(self.K)] = 1.0
        grid = eye.reshape(self.shape + (self.K,), order="F")
        return np.fft.fft2(grid, axes=(0, 1), norm="ortho").reshape(self.L, self.K, order="F")


# ---------------------------------------------------------------- C factors


class DenseC:
    """An explicit ``L x N`` matrix."""

    def __init__(self, matrix):
        matrix = np.ascontiguousarray(matrix, dtype=np.complex128)
        if matrix.ndim != 2:
            raise DimensionError("C must be a 2-D matrix")
        self.matrix = matrix
        self.L, self.N = matrix.shape

    def apply(self, m):
        return self.matrix @ m

    def adjoint(self, v):
        return np.conj(np.conj(v) @ self.matrix)

    def dense(self):
        return self.matrix


class HaarSubspace:
    """``C = conj(F) W_S``: selected Haar synthesis columns seen in Fourier space.

    With ``W`` the orthonormal Haar synthesis matrix on a 2-D grid and ``S``
    a set of coefficient indices (column-major flat), ``C m`` is the unitary
    inverse 2-D DFT of the image synthesised from ``m``.
    """

    def __init__(self, shape, indices):
        self.shape = tuple(int(s) for s in shape)
        self.L = self.shape[0] * self.shape[1]
        indices = np.asarray(indices, dtype=np.intp).ravel()
        if indices.size == 0 or indices.min() < 0 or indices.max() >= self.L:
            raise DimensionError("invalid Haar coefficient indices")
        self.indices = indices
        self.N = indices.size

    def synthesize(self, m):
        """Image ``W_S m`` (column-major grid)."""
        coeffs = np.zeros(self.L, dtype=np.result_type(m, np.float64))
        coeffs[self.indices] = m
        return haar_synthesis(coeffs.reshape(self.shape, order="F"))

    def apply(self, m):
        img = self.synthesize(m)
        return np.fft.ifft2(img, norm="ortho").ravel(order="F")

    def adjoint(self, v):
        grid = np.fft.fft2(v.reshape(self.shape, order="F"), norm="ortho")
        return haar_analysis(grid).ravel(order="F")[self.indices]

    def dense(self):
        out = np.empty((self.L, self.N), dtype=np.complex128)
        e = np.zeros(self.N)
        for j in range(self.N):
            e[j] = 1.0
            out[:, j] = self.apply(e)
            e[j] = 0.0
        return out


def make_partial_dft_b(L, K):
    return PartialDFT(L, K)


def make_gaussian_c(L, N, seed):
    """Dense ``C`` with i.i.d. entries ``N(0, 1/2) + i N(0, 1/2)``."""
    if L < 1 or N < 1:
        raise DimensionError(f"need L, N >= 1, got L={L}, N={N}")
    rng = np.random.default_rng(seed)
    mat = rng.standard_normal((L, N)) + 1j * rng.standard_normal((L, N))
    return DenseC(mat / np.sqrt(2.0))


# ---------------------------------------------------------------- operator


class MeasurementOperator:
    """``A(Z) = diag(B Z C^*)`` with operation counters."""

    def __init__(self, b, c):
        if b.L != c.L:
            raise DimensionError(f"B has L={b.L} rows but C has L={c.L}")
        self.b, self.c = b, c
        self.L, self.K, self.N = b.L, b.K, c.N
        self.counters = Counters()

    def __repr__(self):
        return (
            f"MeasurementOperator(L={self.L}, K={self.K}, N={self.N}, "
            f"B={type(self.b).__name__}, C={type(self.c).__name__})"
        )

    # single factor applications -----------------------------------------
    def B(self, h):
        self.counters.add(nBh=1, nFFT=1)
        return self.b.apply(h)

    def Bt(self, v):
        self.counters.add(nBh=1, nFFT=1)
        return self.b.adjoint(v)

    def C(self, m):
        self.counters.add(nCm=1, nFFT=1)
        return self.c.apply(m)

    def Ct(self, v):
        self.counters.add(nCm=1, nFFT=1)
        return self.c.adjoint(v)

    # A and A^* -----------------------------------------------------------
    def forward(self, h, m):
        h = _as_vector(h, self.K, "h")
        m = _as_vector(m, self.N, "m")
        return self.B(h) * np.conj(self.C(m))

    def adjoint(self, z):
        """Dense ``K x N`` matrix ``B^* diag(z) C`` (one inverse transform per column)."""
        z = _as_vector(z, self.L, "z")
        self.counters.add(nBh=self.N, nFFT=self.N)
        return self.b.adjoint(z[:, None] * self.c.dense())

    def adjoint_matvec(self, z, v):
        """``A^*(z) v = B^*(z * C v)`` without forming ``A^*(z)``."""
        z = _as_vector(z, self.L, "z")
        v = _as_vector(v, self.N, "v")
        return self.Bt(z * self.C(v))

    def adjoint_rmatvec(self, z, u):
        """``A^*(z)^* u = C^*(conj(z) * B u)``."""
        z = _as_vector(z, self.L, "z")
        u = _as_vector(u, self.K, "u")
        return self.Ct(np.conj(z) * self.B(u))

    def dense_B(self):
        return self.b.dense()

    def dense_C(self):
        return self.c.dense()


def apply_A(op, h, m):
    return op.forward(h, m)


def apply_A_adjoint(op, z):
    return op.adjoint(z)


def apply_A_adjoint_times_vec(op, z, v):
    return op.adjoint_matvec(z, v)


def apply_A_adjoint_conj_times_vec(op, z, u):
    return op.adjoint_rmatvec(z, u)


# ---------------------------------------------------------------- spectra


def power_method(matvec, rmatvec, shape, tol=1e-10, max_iter=500, rng=None):
    """Leading singular triple of a matrix given only its two actions.

    Iterates ``u <- M (M^* u)``. Stops once ``||M v - d u|| <= tol * d``.

    Returns
    -------
    d : float
    u : ndarray, unit left singular vector (length ``shape[0]``)
    v : ndarray, unit right singular vector (length ``shape[1]``)
    """
    rng = np.random.default_rng(rng)
    n_left = shape[0]
    u = rng.standard_normal(n_left) + 1j * rng.standard_normal(n_left)
    u /= np.linalg.norm(u)
    best = None
    for _ in range(max_iter):
        w = rmatvec(u)
        d = np.linalg.norm(w)
        if d == 0.0:
            return 0.0, u, np.zeros(shape[1], dtype=np.complex128)
        v = w / d
        mv = matvec(v)
        res = np.linalg.norm(mv - d * u)
        if best is None or res / d < best[0]:
            best = (res / d, d, u, v)
        if res <= tol * d:
            return float(d), u, v
        u = mv / np.linalg.norm(mv)
    _, d, u, v = best
    raise ConvergenceError(
        f"power method did not reach tol={tol:g} in {max_iter} iterations "
        f"(best relative residual {best[0]:.3e})",
        best=(float(d), u, v),
    )


def leading_singular_triple(op, y, tol=1e-10, max_iter=500, seed=0):
    """Leading singular value and vectors of ``A^*(y)``, matrix-free."""
    y = _as_vector(y, op.L, "y")
    if not np.any(y):
        raise ValueError("y must be nonzero")
    return power_method(
        lambda v: op.adjoint_matvec(y, v),
        lambda u: op.adjoint_rmatvec(y, u),
        (op.K, op.N),
        tol=tol,
        max_iter=max_iter,
        rng=seed,
    )


# ---------------------------------------------------------------- noise


@dataclass(frozen=True)
class NoiseModel:
    """Complex Gaussian noise scaled to a target SNR.

    ``e = tau ||s|| w / ||w||`` for signal ``s``, so that
    ``||s||^2 / ||e||^2 = 1 / tau^2``.
    """

    tau: float
    seed: int = 0

    @classmethod
    def from_snr_db(cls, snr_db, seed=0):
        return cls(tau=10.0 ** (-snr_db / 20.0), seed=seed)

    def sample(self, signal):
        rng = substream(self.seed, 7)
        w = rng.standard_normal(signal.shape) + 1j * rng.standard_normal(signal.shape)
        return self.tau * np.linalg.norm(signal) * w / np.linalg.norm(w)


def random_operator(L, K, N, seed):
    """Partial-DFT ``B`` and Gaussian ``C`` for a synthetic trial."""
    return MeasurementOperator(make_partial_dft_b(L, K), make_gaussian_c(L, N, substream(seed, 1)))

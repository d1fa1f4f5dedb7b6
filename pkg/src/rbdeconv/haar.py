"""Orthonormal multilevel 2-D Haar wavelet transform.

Coefficients are stored in-place in an array of the image shape, coarsest
scaling coefficient at ``[0, 0]``. Both transforms accept complex input
(the real and imaginary parts are transformed independently).
"""
import numpy as np

_S = 1.0 / np.sqrt(2.0)


def _check_shape(shape):
    if len(shape) != 2:
        raise ValueError(f"expected a 2-D array, got shape {shape}")
    for n in shape:
        if n < 1 or n & (n - 1):
            raise ValueError(f"image dimensions must be powers of two, got {shape}")


def _levels(shape):
    r, c = shape
    out = []
    while r > 1 or c > 1:
        out.append((r, c))
        r, c = max(r // 2, 1), max(c // 2, 1)
    return out


def haar_analysis(image):
    """Forward transform: pixels -> wavelet coefficients (same shape)."""
    a = np.array(image, dtype=np.result_type(image, np.float64), copy=True)
    _check_shape(a.shape)
    for r, c in _levels(a.shape):
        if r > 1:
            blk = a[:r, :c]
            even, odd = blk[0::2].copy(), blk[1::2].copy()
            a[: r // 2, :c] = (even + odd) * _S
            a[r // 2 : r, :c] = (even - odd) * _S
        if c > 1:
            blk = a[:r, :c]
            even, odd = blk[:, 0::2].copy(), blk[:, 1::2].copy()
            a[:r, : c // 2] = (even + odd) * _S
            a[:r, c // 2 : c] = (even - odd) * _S
    return a


def haar_synthesis(coeffs):
    """Inverse transform: wavelet coefficients -> pixels."""
    a = np.array(coeffs, dtype=np.result_type(coeffs, np.float64), copy=True)
    _check_shape(a.shape)
    for r, c in reversed(_levels(a.shape)):
        if c > 1:
            lo, hi = a[:r, : c // 2].copy(), a[:r, c // 2 : c].copy()
            a[:r, 0:c:2] = (lo + hi) * _S
            a[:r, 1:c:2] = (lo - hi) * _S
        if r > 1:
            lo, hi = a[: r // 2, :c].copy(), a[r // 2 : r, :c].copy()
            a[0:r:2, :c] = (lo + hi) * _S
            a[1:r:2, :c] = (lo - hi) * _S
    return a

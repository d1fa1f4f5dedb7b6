# cython: language_level=3
"""Fused elementwise kernels for the cost and gradient evaluations.

Each kernel replaces a chain of NumPy temporaries with one pass over the
length-L measurement vectors.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def residual(const double complex[::1] bh, const double complex[::1] cm,
             const double complex[::1] y):
    cdef Py_ssize_t i, n = bh.shape[0]
    cdef double re, im, acc = 0.0
    cdef double complex a, b
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] r = out
    for i in range(n):
        a = bh[i]
        b = cm[i]
        re = a.real * b.real + a.imag * b.imag - y[i].real
        im = a.imag * b.real - a.real * b.imag - y[i].imag
        r[i] = re + 1j * im
        acc += re * re + im * im
    return out, acc


def penalty_terms(const double complex[::1] bh, double scale):
    cdef Py_ssize_t i, n = bh.shape[0]
    cdef double t, acc = 0.0
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] g = out
    for i in range(n):
        t = scale * (bh[i].real * bh[i].real + bh[i].imag * bh[i].imag) - 1.0
        if t > 0.0:
            acc += t * t
            g[i] = 2.0 * t
    return acc, out


def clip_magnitudes(const double complex[::1] w, double bound):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double mag, s
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    for i in range(n):
        mag = sqrt(w[i].real * w[i].real + w[i].imag * w[i].imag)
        if mag > bound:
            s = bound / mag
            o[i] = w[i] * s
        else:
            o[i] = w[i]
    return out

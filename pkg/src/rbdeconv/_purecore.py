"""Pure-NumPy versions of the elementwise kernels in ``_fastcore.pyx``."""
import numpy as np


def residual(bh, cm, y):
    """Return ``r = bh * conj(cm) - y`` and ``||r||^2``."""
    r = bh * np.conj(cm) - y
    return r, float(np.vdot(r, r).real)


def penalty_terms(bh, scale):
    """Sum of ``G0(scale |bh_i|^2)`` and the per-entry derivatives ``G0'``."""
    t = scale * (bh.real * bh.real + bh.imag * bh.imag)
    excess = np.maximum(t - 1.0, 0.0)
    return float(excess @ excess), 2.0 * excess


def clip_magnitudes(w, bound):
    """Shrink entries with ``|w_i| > bound`` onto the circle of radius ``bound``."""
    mag = np.abs(w)
    over = mag > bound
    out = w.copy()
    out[over] *= bound / mag[over]
    return out

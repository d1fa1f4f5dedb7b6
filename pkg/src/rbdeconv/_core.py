"""Kernel backend selection.

The compiled ``_fastcore`` extension is used when it imports; otherwise the
NumPy fallback in ``_purecore`` is used. Set ``RBDECONV_PURE=1`` to force
the fallback.
"""
import os

from . import _purecore

BACKEND = "python"
if os.environ.get("RBDECONV_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _fastcore as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _purecore
else:
    _impl = _purecore

residual = _impl.residual
penalty_terms = _impl.penalty_terms
clip_magnitudes = _impl.clip_magnitudes

__all__ = ["BACKEND", "residual", "penalty_terms", "clip_magnitudes"]

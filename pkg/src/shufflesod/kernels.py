"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. Set ``SHUFFLESOD_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("SHUFFLESOD_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def _c64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def unshuffle(x, r):
    return _impl.unshuffle(_c64(x), int(r))


def shuffle(t, r):
    return _impl.shuffle(_c64(t), int(r))


def im2col(xp, kh, kw, stride, Ho, Wo):
    return _impl.im2col(_c64(xp), kh, kw, stride, Ho, Wo)


def col2im(cols, C, Hp, Wp, kh, kw, stride, Ho, Wo):
    return _impl.col2im(_c64(cols), C, Hp, Wp, kh, kw, stride, Ho, Wo)


def level_counts(q, fg):
    q = np.ascontiguousarray(q, dtype=np.uint8).ravel()
    fg = np.ascontiguousarray(fg, dtype=np.uint8).ravel()
    return _impl.level_counts(q, fg)

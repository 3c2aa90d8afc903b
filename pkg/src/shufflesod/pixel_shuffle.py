"""Lossless rescaling between (C, H, W) and (C*r*r, H/r, W/r) layouts.

Index convention (frozen): for a source pixel at row ``y``, column ``x`` and
channel ``c`` of a C-channel map, unshuffling by ``r`` moves it to spatial
position ``(y // r, x // r)`` and channel ``C*r*(y % r) + C*(x % r) + c``.
Shuffle is the exact inverse. Both are pure gathers, so values are never
altered and gradients are the inverse permutation.

Functions accept either an autodiff ``Tensor`` (result is recorded in the
graph) or a plain numpy array ``[B, C, H, W]``.
"""
import numpy as np

from . import kernels
from .autodiff import ops
from .autodiff.tensor import Tensor
from .errors import DimensionError


def _check_factor(r):
    if int(r) != r or r < 1:
        raise DimensionError(f"scale factor must be a positive integer, got {r}")
    return int(r)


def unshuffle(t, r):
    """[B, C, H, W] -> [B, C*r*r, H/r, W/r]."""
    if isinstance(t, Tensor):
        return ops.pixel_unshuffle(t, r)
    r = _check_factor(r)
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 4:
        raise DimensionError(f"unshuffle expects [B,C,H,W], got {t.shape}")
    if t.shape[2] % r or t.shape[3] % r:
        raise DimensionError(f"r={r} does not divide spatial size {t.shape[2]}x{t.shape[3]}")
    return t.copy() if r == 1 else kernels.unshuffle(t, r)


def shuffle(t, r):
    """[B, C*r*r, H, W] -> [B, C, H*r, W*r]; inverse of :func:`unshuffle`."""
    if isinstance(t, Tensor):
        return ops.pixel_shuffle(t, r)
    r = _check_factor(r)
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 4:
        raise DimensionError(f"shuffle expects [B,C*r*r,H,W], got {t.shape}")
    if t.shape[1] % (r * r):
        raise DimensionError(f"channel count {t.shape[1]} not divisible by r^2={r * r}")
    return t.copy() if r == 1 else kernels.shuffle(t, r)


def composition_permutation(channels, r1, r2):
    """Channel permutation relating two-step and one-step unshuffling.

    Returns ``perm`` such that
    ``unshuffle(unshuffle(x, r1), r2)[:, perm] == unshuffle(x, r1 * r2)``.
    """
    r = r1 * r2
    probe = np.arange(channels * r * r, dtype=np.float64).reshape(1, channels, r, r)
    two_step = unshuffle(unshuffle(probe, r1), r2).reshape(-1)
    one_step = unshuffle(probe, r).reshape(-1)
    position = {v: i for i, v in enumerate(two_step)}
    return np.array([position[v] for v in one_step], dtype=np.intp)

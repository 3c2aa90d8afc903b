"""Pure numpy versions of the compiled kernels.

Every function here returns bit-identical results to its counterpart in
``_kernels.pyx``; ``col2im`` accumulates kernel offsets in the same order.
"""
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _unshuffle_index(C, H, W, r):
    # flat source index for every destination slot of one batch item
    y, x, c = np.meshgrid(np.arange(H), np.arange(W), np.arange(C), indexing="ij")
    ch = C * r * (y % r) + C * (x % r) + c
    src = (c * H + y) * W + x
    dst = (ch * (H // r) + y // r) * (W // r) + x // r
    index = np.empty(C * H * W, dtype=np.intp)
    index[dst.ravel()] = src.ravel()
    return index


def unshuffle(x, r):
    B, C, H, W = x.shape
    index = _unshuffle_index(C, H, W, r)
    return x.reshape(B, -1)[:, index].reshape(B, C * r * r, H // r, W // r)


def shuffle(t, r):
    B, Cr, h, w = t.shape
    C = Cr // (r * r)
    index = _unshuffle_index(C, h * r, w * r, r)
    inverse = np.empty_like(index)
    inverse[index] = np.arange(index.size)
    return t.reshape(B, -1)[:, inverse].reshape(B, C, h * r, w * r)


def im2col(xp, kh, kw, stride, Ho, Wo):
    B, C = xp.shape[:2]
    cols = np.empty((B, C, kh, kw, Ho, Wo), dtype=np.float64)
    for ki in range(kh):
        for kj in range(kw):
            cols[:, :, ki, kj] = xp[:, :, ki:ki + stride * Ho:stride, kj:kj + stride * Wo:stride]
    return cols.reshape(B, C * kh * kw, Ho * Wo)


def col2im(cols, C, Hp, Wp, kh, kw, stride, Ho, Wo):
    B = cols.shape[0]
    cols = cols.reshape(B, C, kh, kw, Ho, Wo)
    out = np.zeros((B, C, Hp, Wp), dtype=np.float64)
    for ki in range(kh):
        for kj in range(kw):
            out[:, :, ki:ki + stride * Ho:stride, kj:kj + stride * Wo:stride] += cols[:, :, ki, kj]
    return out


def level_counts(q, fg):
    hist_all = np.bincount(q, minlength=256).astype(np.int64)
    hist_fg = np.bincount(q[fg.astype(bool)], minlength=256).astype(np.int64)
    return hist_all, hist_fg

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Semantics mirror ``_kernels_py`` exactly."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def unshuffle(double[:, :, :, ::1] x, Py_ssize_t r):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t h = H // r, w = W // r
    out_arr = np.empty((B, C * r * r, h, w), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, c, dy, dx, i, j, ch
    with nogil:
        for b in range(B):
            for dy in range(r):
                for dx in range(r):
                    for c in range(C):
                        ch = C * r * dy + C * dx + c
                        for i in range(h):
                            for j in range(w):
                                out[b, ch, i, j] = x[b, c, i * r + dy, j * r + dx]
    return out_arr


def shuffle(double[:, :, :, ::1] t, Py_ssize_t r):
    cdef Py_ssize_t B = t.shape[0], Cr = t.shape[1], h = t.shape[2], w = t.shape[3]
    cdef Py_ssize_t C = Cr // (r * r)
    out_arr = np.empty((B, C, h * r, w * r), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, c, dy, dx, i, j, ch
    with nogil:
        for b in range(B):
            for c in range(C):
                for i in range(h):
                    for dy in range(r):
                        for j in range(w):
                            for dx in range(r):
                                ch = C * r * dy + C * dx + c
                                out[b, c, i * r + dy, j * r + dx] = t[b, ch, i, j]
    return out_arr


def im2col(double[:, :, :, ::1] xp, Py_ssize_t kh, Py_ssize_t kw,
           Py_ssize_t stride, Py_ssize_t Ho, Py_ssize_t Wo):
    cdef Py_ssize_t B = xp.shape[0], C = xp.shape[1]
    cols_arr = np.empty((B, C * kh * kw, Ho * Wo), dtype=np.float64)
    cdef double[:, :, ::1] cols = cols_arr
    cdef Py_ssize_t b, c, ki, kj, i, j, row
    with nogil:
        for b in range(B):
            for c in range(C):
                for ki in range(kh):
                    for kj in range(kw):
                        row = (c * kh + ki) * kw + kj
                        for i in range(Ho):
                            for j in range(Wo):
                                cols[b, row, i * Wo + j] = xp[b, c, ki + stride * i, kj + stride * j]
    return cols_arr


def col2im(double[:, :, ::1] cols, Py_ssize_t C, Py_ssize_t Hp, Py_ssize_t Wp,
           Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t stride, Py_ssize_t Ho, Py_ssize_t Wo):
    cdef Py_ssize_t B = cols.shape[0]
    out_arr = np.zeros((B, C, Hp, Wp), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, c, ki, kj, i, j, row
    with nogil:
        for b in range(B):
            for c in range(C):
                for ki in range(kh):
                    for kj in range(kw):
                        row = (c * kh + ki) * kw + kj
                        for i in range(Ho):
                            for j in range(Wo):
                                out[b, c, ki + stride * i, kj + stride * j] += cols[b, row, i * Wo + j]
    return out_arr


def level_counts(const unsigned char[::1] q, const unsigned char[::1] fg):
    hist_all = np.zeros(256, dtype=np.int64)
    hist_fg = np.zeros(256, dtype=np.int64)
    cdef long long[::1] ha = hist_all
    cdef long long[::1] hf = hist_fg
    cdef Py_ssize_t n = q.shape[0], i
    with nogil:
        for i in range(n):
            ha[q[i]] += 1
            if fg[i]:
                hf[q[i]] += 1
    return hist_all, hist_fg

# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: im2col / col2im and max pooling.

Same contracts and accumulation order as ``_kernels_np``; the two lanes are
interchangeable bit for bit.
"""

import numpy as np

cimport numpy as cnp

ctypedef fused real:
    float
    double


def im2col(real[:, :, :, ::1] x, Py_ssize_t kh, Py_ssize_t kw,
           Py_ssize_t sh, Py_ssize_t sw, real[:, :, ::1] out):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = (h - kh) // sh + 1
    cdef Py_ssize_t ow = (w - kw) // sw + 1
    cdef Py_ssize_t b, ch, ki, kj, i, j, row
    for b in range(n):
        for ch in range(c):
            for ki in range(kh):
                for kj in range(kw):
                    row = (ch * kh + ki) * kw + kj
                    for i in range(oh):
                        for j in range(ow):
                            out[b, row, i * ow + j] = x[b, ch, i * sh + ki, j * sw + kj]
    return np.asarray(out)


def col2im(real[:, :, ::1] cols, Py_ssize_t kh, Py_ssize_t kw,
           Py_ssize_t sh, Py_ssize_t sw, real[:, :, :, ::1] out):
    cdef Py_ssize_t n = out.shape[0], c = out.shape[1], h = out.shape[2], w = out.shape[3]
    cdef Py_ssize_t oh = (h - kh) // sh + 1
    cdef Py_ssize_t ow = (w - kw) // sw + 1
    cdef Py_ssize_t b, ch, ki, kj, i, j, row
    for b in range(n):
        for ch in range(c):
            for ki in range(kh):
                for kj in range(kw):
                    row = (ch * kh + ki) * kw + kj
                    for i in range(oh):
                        for j in range(ow):
                            out[b, ch, i * sh + ki, j * sw + kj] += cols[b, row, i * ow + j]
    return np.asarray(out)


def maxpool(real[:, :, :, ::1] x, Py_ssize_t k, Py_ssize_t s,
            real[:, :, :, ::1] out, cnp.int64_t[:, :, :, ::1] idx):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = (h - k) // s + 1
    cdef Py_ssize_t ow = (w - k) // s + 1
    cdef Py_ssize_t b, ch, i, j, ki, kj, bi, bj
    cdef real best, v
    for b in range(n):
        for ch in range(c):
            for i in range(oh):
                for j in range(ow):
                    best = x[b, ch, i * s, j * s]
                    bi = i * s
                    bj = j * s
                    for ki in range(k):
                        for kj in range(k):
                            v = x[b, ch, i * s + ki, j * s + kj]
                            if v > best:
                                best = v
                                bi = i * s + ki
                                bj = j * s + kj
                    out[b, ch, i, j] = best
                    idx[b, ch, i, j] = bi * w + bj
    return np.asarray(out), np.asarray(idx)


def maxpool_backward(real[:, :, :, ::1] gout, cnp.int64_t[:, :, :, ::1] idx,
                     real[:, :, :, ::1] gx):
    cdef Py_ssize_t n = gout.shape[0], c = gout.shape[1]
    cdef Py_ssize_t oh = gout.shape[2], ow = gout.shape[3]
    cdef Py_ssize_t w = gx.shape[3]
    cdef Py_ssize_t b, ch, i, j
    cdef cnp.int64_t flat
    for b in range(n):
        for ch in range(c):
            for i in range(oh):
                for j in range(ow):
                    flat = idx[b, ch, i, j]
                    gx[b, ch, flat // w, flat % w] += gout[b, ch, i, j]
    return np.asarray(gx)

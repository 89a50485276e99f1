# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled convolution kernels: per-image im2col plus a BLAS GEMM.

Images are processed one at a time so the patch matrix (C*kh*kw, H*W)
stays cache-resident for training-sized patches.  Row-major GEMMs are
expressed through the usual Fortran transposition trick.
"""

import numpy as np

from libc.string cimport memcpy, memset
from scipy.linalg.cython_blas cimport dgemm, sgemm


ctypedef fused real:
    float
    double


cdef void _gemm(char ta, char tb, int m, int n, int k, real alpha,
                const real* a, int lda, const real* b, int ldb,
                real beta, real* c, int ldc) noexcept nogil:
    if real is float:
        sgemm(&ta, &tb, &m, &n, &k, <float*>&alpha, <float*>a, &lda,
              <float*>b, &ldb, <float*>&beta, <float*>c, &ldc)
    else:
        dgemm(&ta, &tb, &m, &n, &k, <double*>&alpha, <double*>a, &lda,
              <double*>b, &ldb, <double*>&beta, <double*>c, &ldc)


cdef void _pad_image(const real* src, real* xp, int ci, int h, int w,
                     int ph, int pw, int hp, int wp) noexcept nogil:
    # src (ci, h, w) -> interior of xp (ci, hp, wp); border already zero
    cdef int c, y
    for c in range(ci):
        for y in range(h):
            memcpy(xp + (c * hp + y + ph) * wp + pw,
                   src + (c * h + y) * w, w * sizeof(real))


cdef void _im2col(const real* xp, real* col, int ci, int h, int w,
                  int kh, int kw, int hp, int wp) noexcept nogil:
    # col rows indexed (c, di, dj); each row is the shifted image, row-major
    cdef int c, di, dj, y, row
    for c in range(ci):
        for di in range(kh):
            for dj in range(kw):
                row = (c * kh + di) * kw + dj
                for y in range(h):
                    memcpy(col + (row * h + y) * w,
                           xp + (c * hp + y + di) * wp + dj,
                           w * sizeof(real))


cdef void _col2im_add(const real* colg, real* gxp, int ci, int h, int w,
                      int kh, int kw, int hp, int wp) noexcept nogil:
    cdef int c, di, dj, y, i, row
    cdef const real* src
    cdef real* dst
    for c in range(ci):
        for di in range(kh):
            for dj in range(kw):
                row = (c * kh + di) * kw + dj
                for y in range(h):
                    src = colg + (row * h + y) * w
                    dst = gxp + (c * hp + y + di) * wp + dj
                    for i in range(w):
                        dst[i] += src[i]


def conv2d_forward(real[:, :, :, ::1] x, real[:, :, :, ::1] w, real[::1] b):
    cdef int bsz = x.shape[0], ci = x.shape[1], h = x.shape[2], wid = x.shape[3]
    cdef int co = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef int ph = kh // 2, pw = kw // 2
    cdef int hp = h + 2 * ph, wp = wid + 2 * pw
    cdef int hw = h * wid, ck = ci * kh * kw
    cdef int img, o, i

    dtype = np.float32 if real is float else np.float64
    out_arr = np.empty((bsz, co, h, wid), dtype=dtype)
    xp_arr = np.zeros((ci, hp, wp), dtype=dtype)
    col_arr = np.empty((ck, hw), dtype=dtype)

    cdef real[:, :, :, ::1] out = out_arr
    cdef real[:, :, ::1] xp = xp_arr
    cdef real[:, ::1] col = col_arr
    cdef real* po
    cdef real bias

    with nogil:
        for img in range(bsz):
            _pad_image(&x[img, 0, 0, 0], &xp[0, 0, 0], ci, h, wid, ph, pw, hp, wp)
            _im2col(&xp[0, 0, 0], &col[0, 0], ci, h, wid, kh, kw, hp, wp)
            # out[img] (co, hw) = w (co, ck) @ col (ck, hw), row-major
            _gemm(c'N', c'N', hw, co, ck, <real>1.0,
                  &col[0, 0], hw, &w[0, 0, 0, 0], ck,
                  <real>0.0, &out[img, 0, 0, 0], hw)
            for o in range(co):
                bias = b[o]
                po = &out[img, o, 0, 0]
                for i in range(hw):
                    po[i] += bias
    return out_arr


def conv2d_backward(real[:, :, :, ::1] x, real[:, :, :, ::1] w,
                    real[:, :, :, ::1] gy):
    cdef int bsz = x.shape[0], ci = x.shape[1], h = x.shape[2], wid = x.shape[3]
    cdef int co = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef int ph = kh // 2, pw = kw // 2
    cdef int hp = h + 2 * ph, wp = wid + 2 * pw
    cdef int hw = h * wid, ck = ci * kh * kw
    cdef int img, o, i, c, y
    cdef double acc

    dtype = np.float32 if real is float else np.float64
    gx_arr = np.empty((bsz, ci, h, wid), dtype=dtype)
    gw_arr = np.zeros((co, ci, kh, kw), dtype=dtype)
    gb_arr = np.zeros(co, dtype=dtype)
    xp_arr = np.zeros((ci, hp, wp), dtype=dtype)
    col_arr = np.empty((ck, hw), dtype=dtype)
    colg_arr = np.empty((ck, hw), dtype=dtype)
    gxp_arr = np.empty((ci, hp, wp), dtype=dtype)

    cdef real[:, :, :, ::1] gx = gx_arr
    cdef real[:, :, :, ::1] gw = gw_arr
    cdef real[::1] gb = gb_arr
    cdef real[:, :, ::1] xp = xp_arr
    cdef real[:, ::1] col = col_arr
    cdef real[:, ::1] colg = colg_arr
    cdef real[:, :, ::1] gxp = gxp_arr
    cdef const real* pg

    with nogil:
        for img in range(bsz):
            _pad_image(&x[img, 0, 0, 0], &xp[0, 0, 0], ci, h, wid, ph, pw, hp, wp)
            _im2col(&xp[0, 0, 0], &col[0, 0], ci, h, wid, kh, kw, hp, wp)
            # gw (co, ck) += gy[img] (co, hw) @ col^T (hw, ck)
            _gemm(c'T', c'N', ck, co, hw, <real>1.0,
                  &col[0, 0], hw, &gy[img, 0, 0, 0], hw,
                  <real>1.0, &gw[0, 0, 0, 0], ck)
            # colg (ck, hw) = w^T (ck, co) @ gy[img] (co, hw)
            _gemm(c'N', c'T', hw, ck, co, <real>1.0,
                  &gy[img, 0, 0, 0], hw, &w[0, 0, 0, 0], ck,
                  <real>0.0, &colg[0, 0], hw)
            memset(&gxp[0, 0, 0], 0, ci * hp * wp * sizeof(real))
            _col2im_add(&colg[0, 0], &gxp[0, 0, 0], ci, h, wid, kh, kw, hp, wp)
            for c in range(ci):
                for y in range(h):
                    memcpy(&gx[img, c, y, 0], &gxp[c, y + ph, pw], wid * sizeof(real))
            for o in range(co):
                pg = &gy[img, o, 0, 0]
                acc = 0.0
                for i in range(hw):
                    acc += pg[i]
                gb[o] += <real>acc
    return gx_arr, gw_arr, gb_arr

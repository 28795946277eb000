# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for convolution and bilinear resize.

Both kernels use a fixed reduction order so repeated calls on identical
buffers produce identical bits.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


ctypedef fused acc_t:
    float
    double


cdef void _conv_plane(const float[:, :, :, ::1] x,
                      const float[:, :, :, ::1] w,
                      float bias_v,
                      float[:, :, :, ::1] out,
                      acc_t[:, ::1] acc,
                      Py_ssize_t n, Py_ssize_t co, Py_ssize_t ci0,
                      Py_ssize_t sh, Py_ssize_t sw) noexcept nogil:
    cdef Py_ssize_t cig = w.shape[1]
    cdef Py_ssize_t kh = w.shape[2]
    cdef Py_ssize_t kw = w.shape[3]
    cdef Py_ssize_t ho = out.shape[2]
    cdef Py_ssize_t wo = out.shape[3]
    cdef Py_ssize_t ci, ky, kx, oy, ox
    cdef acc_t wv
    cdef const float* row
    cdef acc_t* arow

    for oy in range(ho):
        for ox in range(wo):
            acc[oy, ox] = bias_v
    for ci in range(cig):
        for ky in range(kh):
            for kx in range(kw):
                wv = w[co, ci, ky, kx]
                for oy in range(ho):
                    row = &x[n, ci0 + ci, oy * sh + ky, kx]
                    arow = &acc[oy, 0]
                    for ox in range(wo):
                        arow[ox] += wv * row[ox * sw]
    for oy in range(ho):
        for ox in range(wo):
            out[n, co, oy, ox] = <float>acc[oy, ox]


def conv2d_valid(const float[:, :, :, ::1] x,
                 const float[:, :, :, ::1] w,
                 const float[::1] bias,
                 int stride_h, int stride_w, int groups,
                 bint accumulate_double=False):
    """Unpadded grouped cross-correlation of an already padded NCHW input."""
    cdef Py_ssize_t nb = x.shape[0]
    cdef Py_ssize_t cin = x.shape[1]
    cdef Py_ssize_t cout = w.shape[0]
    cdef Py_ssize_t cig = w.shape[1]
    cdef Py_ssize_t ho = (x.shape[2] - w.shape[2]) // stride_h + 1
    cdef Py_ssize_t wo = (x.shape[3] - w.shape[3]) // stride_w + 1
    cdef Py_ssize_t cog = cout // groups
    cdef Py_ssize_t n, co

    if cig * groups != cin or cog * groups != cout:
        raise ValueError("channel counts do not match groups")
    if ho < 1 or wo < 1:
        raise ValueError("kernel larger than padded input")

    out_arr = np.empty((nb, cout, ho, wo), dtype=np.float32)
    cdef float[:, :, :, ::1] out = out_arr
    cdef float[:, ::1] acc32
    cdef double[:, ::1] acc64

    if accumulate_double:
        acc64 = np.empty((ho, wo), dtype=np.float64)
        with nogil:
            for n in range(nb):
                for co in range(cout):
                    _conv_plane(x, w, bias[co], out, acc64, n, co,
                                (co // cog) * cig, stride_h, stride_w)
    else:
        acc32 = np.empty((ho, wo), dtype=np.float32)
        with nogil:
            for n in range(nb):
                for co in range(cout):
                    _conv_plane(x, w, bias[co], out, acc32, n, co,
                                (co // cog) * cig, stride_h, stride_w)
    return out_arr


cdef void _axis_weights(Py_ssize_t n_in, Py_ssize_t n_out, bint align_corners,
                        Py_ssize_t[::1] lo, Py_ssize_t[::1] hi,
                        float[::1] frac) noexcept nogil:
    cdef Py_ssize_t i, i0
    cdef double src, scale
    if align_corners:
        scale = (n_in - 1.0) / (n_out - 1.0) if n_out > 1 else 0.0
    else:
        scale = <double>n_in / <double>n_out
    for i in range(n_out):
        if align_corners:
            src = i * scale
        else:
            src = (i + 0.5) * scale - 0.5
            if src < 0.0:
                src = 0.0
        i0 = <Py_ssize_t>floor(src)
        if i0 > n_in - 1:
            i0 = n_in - 1
        lo[i] = i0
        hi[i] = i0 + 1 if i0 + 1 < n_in else n_in - 1
        frac[i] = <float>(src - i0)


def resize_bilinear(const float[:, :, :, ::1] x, int out_h, int out_w,
                    bint align_corners=False):
    """Bilinear resize of an NCHW float32 buffer."""
    cdef Py_ssize_t nb = x.shape[0]
    cdef Py_ssize_t c = x.shape[1]
    cdef Py_ssize_t h = x.shape[2]
    cdef Py_ssize_t w = x.shape[3]
    cdef Py_ssize_t n, k, oy, ox
    cdef float fy, fx, a, b, top, bot

    ylo_a = np.empty(out_h, dtype=np.intp)
    yhi_a = np.empty(out_h, dtype=np.intp)
    fy_a = np.empty(out_h, dtype=np.float32)
    xlo_a = np.empty(out_w, dtype=np.intp)
    xhi_a = np.empty(out_w, dtype=np.intp)
    fx_a = np.empty(out_w, dtype=np.float32)
    cdef Py_ssize_t[::1] ylo = ylo_a, yhi = yhi_a, xlo = xlo_a, xhi = xhi_a
    cdef float[::1] fyv = fy_a, fxv = fx_a

    out_arr = np.empty((nb, c, out_h, out_w), dtype=np.float32)
    cdef float[:, :, :, ::1] out = out_arr

    with nogil:
        _axis_weights(h, out_h, align_corners, ylo, yhi, fyv)
        _axis_weights(w, out_w, align_corners, xlo, xhi, fxv)
        for n in range(nb):
            for k in range(c):
                for oy in range(out_h):
                    fy = fyv[oy]
                    for ox in range(out_w):
                        fx = fxv[ox]
                        # lerp form a + (b - a) * f keeps constant regions exact
                        a = x[n, k, ylo[oy], xlo[ox]]
                        b = x[n, k, ylo[oy], xhi[ox]]
                        top = a + (b - a) * fx
                        a = x[n, k, yhi[oy], xlo[ox]]
                        b = x[n, k, yhi[oy], xhi[ox]]
                        bot = a + (b - a) * fx
                        out[n, k, oy, ox] = top + (bot - top) * fy
    return out_arr

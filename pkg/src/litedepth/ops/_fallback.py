"""Pure-numpy versions of the compiled kernels.

The arithmetic mirrors ``_kernels.pyx`` operation for operation (same
reduction order, same rounding points), so both backends return identical
bits on the same inputs.
"""

import numpy as np


def conv2d_valid(x, w, bias, stride_h, stride_w, groups, accumulate_double=False):
    nb, cin, hp, wp = x.shape
    cout, cig, kh, kw = w.shape
    ho = (hp - kh) // stride_h + 1
    wo = (wp - kw) // stride_w + 1
    cog = cout // groups
    if cig * groups != cin or cog * groups != cout:
        raise ValueError("channel counts do not match groups")
    if ho < 1 or wo < 1:
        raise ValueError("kernel larger than padded input")

    acc_dtype = np.float64 if accumulate_double else np.float32
    xg = x.reshape(nb, groups, cig, hp, wp).astype(acc_dtype, copy=False)
    wg = w.reshape(groups, cog, cig, kh, kw).astype(acc_dtype, copy=False)
    acc = np.empty((nb, groups, cog, ho, wo), dtype=acc_dtype)
    acc[...] = bias.astype(acc_dtype).reshape(1, groups, cog, 1, 1)
    y_stop = stride_h * (ho - 1) + 1
    x_stop = stride_w * (wo - 1) + 1
    for ci in range(cig):
        for ky in range(kh):
            for kx in range(kw):
                patch = xg[:, :, ci, ky:ky + y_stop:stride_h, kx:kx + x_stop:stride_w]
                acc += wg[None, :, :, ci, ky, kx, None, None] * patch[:, :, None]
    return acc.reshape(nb, cout, ho, wo).astype(np.float32)


def _axis_weights(n_in, n_out, align_corners):
    idx = np.arange(n_out, dtype=np.float64)
    if align_corners:
        scale = (n_in - 1.0) / (n_out - 1.0) if n_out > 1 else 0.0
        src = idx * scale
    else:
        src = np.maximum((idx + 0.5) * (n_in / n_out) - 0.5, 0.0)
    lo = np.minimum(np.floor(src).astype(np.intp), n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = (src - lo).astype(np.float32)
    return lo, hi, frac


def resize_bilinear(x, out_h, out_w, align_corners=False):
    _, _, h, w = x.shape
    ylo, yhi, fy = _axis_weights(h, out_h, align_corners)
    xlo, xhi, fx = _axis_weights(w, out_w, align_corners)
    rows_lo = x[:, :, ylo, :]
    rows_hi = x[:, :, yhi, :]
    a, b = rows_lo[..., xlo], rows_lo[..., xhi]
    top = a + (b - a) * fx
    a, b = rows_hi[..., xlo], rows_hi[..., xhi]
    bot = a + (b - a) * fx
    return (top + (bot - top) * fy[:, None]).astype(np.float32)

"""Pure-numpy convolution kernels (fallback backend).

All three functions mirror the compiled extension exactly. The forward and
input-gradient kernels accumulate each output element in the same order as
the C loops (bias first, then input channel, kernel row, kernel column), so
their results are bit-identical to the compiled backend. The weight-gradient
kernel reduces over pixels with numpy's pairwise summation, which is
deterministic per backend but may differ from the compiled backend in the
last few ulps.

Conventions: planes are float64 arrays shaped (channels, height, width),
kernels (out, in, kh, kw) with odd kh == kw, zero same-padding.
"""

import numpy as np


def conv2d_forward(inp, weight, bias):
    """Same-padded 2-d convolution; out[o] = bias[o] + sum_{i,ky,kx} w*x."""
    c_out, c_in, kh, kw = weight.shape
    _, h, w = inp.shape
    p = kh // 2
    pad = np.zeros((c_in, h + 2 * p, w + 2 * p))
    pad[:, p:p + h, p:p + w] = inp
    out = np.empty((c_out, h, w))
    out[:] = bias[:, None, None]
    for i in range(c_in):
        for ky in range(kh):
            for kx in range(kw):
                out += weight[:, i, ky, kx, None, None] * pad[i, ky:ky + h, kx:kx + w]
    return out


def conv2d_backward_input(dout, weight):
    """Gradient w.r.t. the convolution input (full correlation with w)."""
    c_out, c_in, kh, kw = weight.shape
    _, h, w = dout.shape
    p = kh // 2
    dpad = np.zeros((c_out, h + 2 * p, w + 2 * p))
    dpad[:, p:p + h, p:p + w] = dout
    din = np.zeros((c_in, h, w))
    for o in range(c_out):
        for ky in range(kh):
            for kx in range(kw):
                din += (
                    weight[o, :, ky, kx, None, None]
                    * dpad[o, 2 * p - ky:2 * p - ky + h, 2 * p - kx:2 * p - kx + w]
                )
    return din


def conv2d_backward_weights(dout, inp, kh, kw):
    """Gradients w.r.t. kernel and bias."""
    c_out, h, w = dout.shape
    c_in = inp.shape[0]
    p = kh // 2
    pad = np.zeros((c_in, h + 2 * p, w + 2 * p))
    pad[:, p:p + h, p:p + w] = inp
    # windows[i, ky, kx] is the hxw patch of pad aligned with kernel tap (ky, kx)
    windows = np.lib.stride_tricks.sliding_window_view(pad, (h, w), axis=(1, 2))
    dw = np.einsum("ohw,iyxhw->oiyx", dout, windows)
    db = dout.sum(axis=(1, 2))
    return dw, db

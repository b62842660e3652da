# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution kernels (hot loops of training and inference).

Accumulation order is fixed and identical to the numpy fallback in
conv_py.py: each output element starts from the bias and adds tap terms in
(input channel, kernel row, kernel column) order; the input gradient adds
terms in (output channel, kernel row, kernel column) order. The loops below
keep that per-element order while iterating the output column innermost, so
the compiler can vectorize across columns without reassociating any sums.
Together with -ffp-contract=off this makes forward and input-gradient
results bit-identical across backends. The weight gradient reduces over
pixels in a fixed interleaved order (per-backend deterministic only).
"""

import numpy as np


def conv2d_forward(double[:, :, ::1] inp, double[:, :, :, ::1] weight,
                   double[::1] bias):
    cdef Py_ssize_t c_in = inp.shape[0], h = inp.shape[1], w = inp.shape[2]
    cdef Py_ssize_t c_out = weight.shape[0], kh = weight.shape[2], kw = weight.shape[3]
    cdef Py_ssize_t p = kh // 2

    pad_arr = np.zeros((c_in, h + 2 * p, w + 2 * p))
    pad_arr[:, p:p + h, p:p + w] = np.asarray(inp)
    cdef double[:, :, ::1] pad = pad_arr

    out_arr = np.empty((c_out, h, w))
    cdef double[:, :, ::1] out = out_arr

    cdef Py_ssize_t o, y, x, i, ky, kx
    cdef double wv, bv
    cdef double* row
    cdef double* src
    for o in range(c_out):
        bv = bias[o]
        for y in range(h):
            row = &out[o, y, 0]
            for x in range(w):
                row[x] = bv
            for i in range(c_in):
                for ky in range(kh):
                    for kx in range(kw):
                        wv = weight[o, i, ky, kx]
                        src = &pad[i, y + ky, kx]
                        for x in range(w):
                            row[x] = row[x] + wv * src[x]
    return out_arr


def conv2d_backward_input(double[:, :, ::1] dout, double[:, :, :, ::1] weight):
    cdef Py_ssize_t c_out = dout.shape[0], h = dout.shape[1], w = dout.shape[2]
    cdef Py_ssize_t c_in = weight.shape[1], kh = weight.shape[2], kw = weight.shape[3]
    cdef Py_ssize_t p = kh // 2

    dpad_arr = np.zeros((c_out, h + 2 * p, w + 2 * p))
    dpad_arr[:, p:p + h, p:p + w] = np.asarray(dout)
    cdef double[:, :, ::1] dpad = dpad_arr

    din_arr = np.empty((c_in, h, w))
    cdef double[:, :, ::1] din = din_arr

    cdef Py_ssize_t i, y, x, o, ky, kx
    cdef double wv
    cdef double* row
    cdef double* src
    for i in range(c_in):
        for y in range(h):
            row = &din[i, y, 0]
            for x in range(w):
                row[x] = 0.0
            for o in range(c_out):
                for ky in range(kh):
                    for kx in range(kw):
                        wv = weight[o, i, ky, kx]
                        src = &dpad[o, y + 2 * p - ky, 2 * p - kx]
                        for x in range(w):
                            row[x] = row[x] + wv * src[x]
    return din_arr


def conv2d_backward_weights(double[:, :, ::1] dout, double[:, :, ::1] inp,
                            Py_ssize_t kh, Py_ssize_t kw):
    cdef Py_ssize_t c_out = dout.shape[0], h = dout.shape[1], w = dout.shape[2]
    cdef Py_ssize_t c_in = inp.shape[0]
    cdef Py_ssize_t p = kh // 2

    pad_arr = np.zeros((c_in, h + 2 * p, w + 2 * p))
    pad_arr[:, p:p + h, p:p + w] = np.asarray(inp)
    cdef double[:, :, ::1] pad = pad_arr

    dw_arr = np.empty((c_out, c_in, kh, kw))
    db_arr = np.empty(c_out)
    cdef double[:, :, :, ::1] dw = dw_arr
    cdef double[::1] db = db_arr

    # four interleaved accumulators break the sequential dependency chain;
    # the combination order is fixed, so results stay deterministic
    cdef Py_ssize_t o, i, ky, kx, y, x
    cdef double a0, a1, a2, a3
    cdef double* drow
    cdef double* srow
    for o in range(c_out):
        for i in range(c_in):
            for ky in range(kh):
                for kx in range(kw):
                    a0 = 0.0
                    a1 = 0.0
                    a2 = 0.0
                    a3 = 0.0
                    for y in range(h):
                        drow = &dout[o, y, 0]
                        srow = &pad[i, y + ky, kx]
                        x = 0
                        while x + 4 <= w:
                            a0 = a0 + drow[x] * srow[x]
                            a1 = a1 + drow[x + 1] * srow[x + 1]
                            a2 = a2 + drow[x + 2] * srow[x + 2]
                            a3 = a3 + drow[x + 3] * srow[x + 3]
                            x += 4
                        while x < w:
                            a0 = a0 + drow[x] * srow[x]
                            x += 1
                    dw[o, i, ky, kx] = ((a0 + a1) + a2) + a3
    for o in range(c_out):
        a0 = 0.0
        a1 = 0.0
        a2 = 0.0
        a3 = 0.0
        for y in range(h):
            drow = &dout[o, y, 0]
            x = 0
            while x + 4 <= w:
                a0 = a0 + drow[x]
                a1 = a1 + drow[x + 1]
                a2 = a2 + drow[x + 2]
                a3 = a3 + drow[x + 3]
                x += 4
            while x < w:
                a0 = a0 + drow[x]
                x += 1
        db[o] = ((a0 + a1) + a2) + a3
    return dw_arr, db_arr

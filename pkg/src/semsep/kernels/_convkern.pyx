# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled depthwise-convolution kernels (2-D 3x3 and dilated 1-D 3-tap).

Same contracts as :mod:`semsep.kernels.reference`; that module is the
fallback when this extension is unavailable.
"""

import numpy as np

cimport cython
cimport numpy as cnp

ctypedef fused real:
    float
    double


def depthwise_conv2d_fwd(real[:, :, :, ::1] x, real[:, :, ::1] w, int stride):
    cdef Py_ssize_t n_batch = x.shape[0], channels = x.shape[1]
    cdef Py_ssize_t h_in = x.shape[2], w_in = x.shape[3]
    cdef Py_ssize_t h_out = (h_in - 1) // stride + 1
    cdef Py_ssize_t w_out = (w_in - 1) // stride + 1
    out_arr = np.zeros((n_batch, channels, h_out, w_out),
                       dtype=np.asarray(x).dtype)
    cdef real[:, :, :, ::1] y = out_arr
    cdef Py_ssize_t n, c, ho, wo, kh, kw, hi, wi
    cdef real acc
    for n in range(n_batch):
        for c in range(channels):
            for ho in range(h_out):
                for wo in range(w_out):
                    acc = 0
                    for kh in range(3):
                        hi = ho * stride + kh - 1
                        if hi < 0 or hi >= h_in:
                            continue
                        for kw in range(3):
                            wi = wo * stride + kw - 1
                            if wi < 0 or wi >= w_in:
                                continue
                            acc = acc + w[c, kh, kw] * x[n, c, hi, wi]
                    y[n, c, ho, wo] = acc
    return out_arr


def depthwise_conv2d_bwd(real[:, :, :, ::1] x, real[:, :, ::1] w,
                         real[:, :, :, ::1] gy, int stride):
    cdef Py_ssize_t n_batch = x.shape[0], channels = x.shape[1]
    cdef Py_ssize_t h_in = x.shape[2], w_in = x.shape[3]
    cdef Py_ssize_t h_out = gy.shape[2], w_out = gy.shape[3]
    dtype = np.asarray(x).dtype
    gx_arr = np.zeros((n_batch, channels, h_in, w_in), dtype=dtype)
    gw_arr = np.zeros((channels, 3, 3), dtype=dtype)
    cdef real[:, :, :, ::1] gx = gx_arr
    cdef real[:, :, ::1] gw = gw_arr
    cdef Py_ssize_t n, c, ho, wo, kh, kw, hi, wi
    cdef real g
    for n in range(n_batch):
        for c in range(channels):
            for ho in range(h_out):
                for wo in range(w_out):
                    g = gy[n, c, ho, wo]
                    for kh in range(3):
                        hi = ho * stride + kh - 1
                        if hi < 0 or hi >= h_in:
                            continue
                        for kw in range(3):
                            wi = wo * stride + kw - 1
                            if wi < 0 or wi >= w_in:
                                continue
                            gx[n, c, hi, wi] += w[c, kh, kw] * g
                            gw[c, kh, kw] += x[n, c, hi, wi] * g
    return gx_arr, gw_arr


def dilated_conv1d_fwd(real[:, ::1] x, real[:, ::1] w, int dilation):
    cdef Py_ssize_t n_frames = x.shape[0], channels = x.shape[1]
    out_arr = np.zeros((n_frames, channels), dtype=np.asarray(x).dtype)
    cdef real[:, ::1] y = out_arr
    cdef Py_ssize_t t, c, k, ti
    cdef real acc
    for t in range(n_frames):
        for c in range(channels):
            acc = 0
            for k in range(3):
                ti = t + (k - 1) * dilation
                if ti < 0 or ti >= n_frames:
                    continue
                acc = acc + w[c, k] * x[ti, c]
            y[t, c] = acc
    return out_arr


def dilated_conv1d_bwd(real[:, ::1] x, real[:, ::1] w, real[:, ::1] gy,
                       int dilation):
    cdef Py_ssize_t n_frames = x.shape[0], channels = x.shape[1]
    dtype = np.asarray(x).dtype
    gx_arr = np.zeros((n_frames, channels), dtype=dtype)
    gw_arr = np.zeros((channels, 3), dtype=dtype)
    cdef real[:, ::1] gx = gx_arr
    cdef real[:, ::1] gw = gw_arr
    cdef Py_ssize_t t, c, k, ti
    cdef real g
    for t in range(n_frames):
        for c in range(channels):
            g = gy[t, c]
            for k in range(3):
                ti = t + (k - 1) * dilation
                if ti < 0 or ti >= n_frames:
                    continue
                gx[ti, c] += w[c, k] * g
                gw[c, k] += x[ti, c] * g
    return gx_arr, gw_arr

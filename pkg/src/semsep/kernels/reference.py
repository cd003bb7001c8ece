"""Pure-numpy depthwise-convolution kernels (fallback backend).

All kernels use "same" zero padding.  The 2-D kernel is 3x3 over NCHW
input with per-channel weights (C, 3, 3); the 1-D kernel is a 3-tap
per-channel filter over time-major (T, C) input with weights (C, 3) and
a configurable dilation.  Output height/width for stride ``s`` is
``(size - 1) // s + 1``.
"""

import numpy as np


def depthwise_conv2d_fwd(x, w, stride):
    n, c, h, wd = x.shape
    ho = (h - 1) // stride + 1
    wo = (wd - 1) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    y = np.zeros((n, c, ho, wo), dtype=x.dtype)
    for kh in range(3):
        for kw in range(3):
            patch = xp[:, :, kh:kh + stride * ho:stride, kw:kw + stride * wo:stride]
            y += w[None, :, kh, kw, None, None] * patch
    return y


def depthwise_conv2d_bwd(x, w, gy, stride):
    n, c, h, wd = x.shape
    ho, wo = gy.shape[2], gy.shape[3]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    gxp = np.zeros_like(xp)
    gw = np.zeros_like(w)
    for kh in range(3):
        for kw in range(3):
            sl = (slice(None), slice(None),
                  slice(kh, kh + stride * ho, stride),
                  slice(kw, kw + stride * wo, stride))
            gxp[sl] += w[None, :, kh, kw, None, None] * gy
            gw[:, kh, kw] = np.einsum("nchw,nchw->c", xp[sl], gy)
    return gxp[:, :, 1:h + 1, 1:wd + 1], gw


def dilated_conv1d_fwd(x, w, dilation):
    t, c = x.shape
    xp = np.pad(x, ((dilation, dilation), (0, 0)))
    y = np.zeros_like(x)
    for k in range(3):
        y += w[None, :, k] * xp[k * dilation:k * dilation + t]
    return y


def dilated_conv1d_bwd(x, w, gy, dilation):
    t, c = x.shape
    xp = np.pad(x, ((dilation, dilation), (0, 0)))
    gxp = np.zeros_like(xp)
    gw = np.zeros_like(w)
    for k in range(3):
        sl = slice(k * dilation, k * dilation + t)
        gxp[sl] += w[None, :, k] * gy
        gw[:, k] = np.einsum("tc,tc->c", xp[sl], gy)
    return gxp[dilation:dilation + t], gw

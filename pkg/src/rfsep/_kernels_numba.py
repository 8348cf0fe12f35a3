"""Numba-jitted kernels for the fractionally dilated convolution.

Same contracts as ``_kernels_numpy``; the gather/scatter loops are fused
per element instead of materializing slice temporaries. Kernels are
nopython, nogil, and cached on disk after the first compile.
"""
from __future__ import annotations

import numpy as np
from numba import njit

BACKEND = "numba"


@njit(cache=True, nogil=True)
def frac_gather(xpad, shift, frac, T):
    C = xpad.shape[0]
    k = shift.shape[0]
    out = np.empty((C * k, T), dtype=np.float64)
    for c in range(C):
        base = c * k
        for j in range(k):
            s = shift[j]
            f = frac[j]
            w0 = 1.0 - f
            row = base + j
            for t in range(T):
                out[row, t] = w0 * xpad[c, t + s] + f * xpad[c, t + s + 1]
    return out


@njit(cache=True, nogil=True)
def frac_scatter(gxhat, shift, frac, Tp):
    CK, T = gxhat.shape
    k = shift.shape[0]
    C = CK // k
    out = np.zeros((C, Tp), dtype=np.float64)
    for c in range(C):
        base = c * k
        for j in range(k):
            s = shift[j]
            f = frac[j]
            w0 = 1.0 - f
            row = base + j
            for t in range(T):
                g = gxhat[row, t]
                out[c, t + s] += w0 * g
                out[c, t + s + 1] += f * g
    return out


@njit(cache=True, nogil=True)
def frac_dilation_grad(gxhat, xpad, shift_left, taps):
    CK, T = gxhat.shape
    k = shift_left.shape[0]
    C = CK // k
    total = 0.0
    for c in range(C):
        base = c * k
        for j in range(k):
            m = taps[j]
            if m == 0.0:
                continue
            s = shift_left[j]
            row = base + j
            acc = 0.0
            for t in range(T):
                acc += gxhat[row, t] * (xpad[c, t + s + 1] - xpad[c, t + s])
            total += m * acc
    return total

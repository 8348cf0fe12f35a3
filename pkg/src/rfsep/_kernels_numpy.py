"""Pure-numpy kernels for the fractionally dilated convolution.

Reference implementation of the hot inner loops; semantically identical to
the jitted versions in ``_kernels_numba``. The tap loop is a short Python
loop over k slices, so everything heavy is vectorized slice arithmetic.
"""
from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def frac_gather(xpad: np.ndarray, shift: np.ndarray, frac: np.ndarray, T: int) -> np.ndarray:
    """Interpolated tap reads: out[c*k+j, t] = lerp(xpad[c, t+shift[j]], frac[j])."""
    C = xpad.shape[0]
    k = shift.shape[0]
    out = np.empty((C, k, T), dtype=np.float64)
    for j in range(k):
        s = int(shift[j])
        f = float(frac[j])
        out[:, j, :] = (1.0 - f) * xpad[:, s:s + T] + f * xpad[:, s + 1:s + 1 + T]
    return out.reshape(C * k, T)


def frac_scatter(gxhat: np.ndarray, shift: np.ndarray, frac: np.ndarray, Tp: int) -> np.ndarray:
    """Adjoint of frac_gather: scatter tap gradients back onto the padded input."""
    k = shift.shape[0]
    CK, T = gxhat.shape
    g = gxhat.reshape(CK // k, k, T)
    out = np.zeros((CK // k, Tp), dtype=np.float64)
    for j in range(k):
        s = int(shift[j])
        f = float(frac[j])
        out[:, s:s + T] += (1.0 - f) * g[:, j, :]
        out[:, s + 1:s + 1 + T] += f * g[:, j, :]
    return out


def frac_dilation_grad(gxhat: np.ndarray, xpad: np.ndarray, shift_left: np.ndarray,
                       taps: np.ndarray) -> float:
    """Gradient of the loss w.r.t. the dilation rate.

    Uses the left-limit interval at integer tap offsets (shift_left is
    ceil(offset)-1 in padded coordinates), so the piecewise-linear
    interpolation has a defined subgradient everywhere.
    """
    k = shift_left.shape[0]
    CK, T = gxhat.shape
    g = gxhat.reshape(CK // k, k, T)
    total = 0.0
    for j in range(k):
        m = float(taps[j])
        if m == 0.0:
            continue
        s = int(shift_left[j])
        diff = xpad[:, s + 1:s + 1 + T] - xpad[:, s:s + T]
        total += m * float(np.sum(g[:, j, :] * diff))
    return total

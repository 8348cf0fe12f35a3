"""Shared test fixtures: independent oracles and the toy recovery model.

The oracles here are deliberately written from scratch against the
mathematical definitions (plain loops, no shared code with the package)
so they can vouch for the implementations.
"""
from __future__ import annotations

import math

import numpy as np

from rfsep.autodiff import DilationParam, Tensor, conv1d_frac


def oracle_int_dilated_conv(x: np.ndarray, kernel: np.ndarray, d: int) -> np.ndarray:
    """Standard integer-dilated "same" conv with centered taps, zero padding."""
    out_ch, in_ch, k = kernel.shape
    T = x.shape[1]
    half = (k - 1) // 2
    out = np.zeros((out_ch, T))
    for o in range(out_ch):
        for t in range(T):
            acc = 0.0
            for c in range(in_ch):
                for j in range(k):
                    src = t + (j - half) * d
                    if 0 <= src < T:
                        acc += kernel[o, c, j] * x[c, src]
            out[o, t] = acc
    return out


def oracle_frac_conv(x: np.ndarray, kernel: np.ndarray, d: float) -> np.ndarray:
    """Brute-force fractional conv: interpolate the padded input pointwise."""
    out_ch, in_ch, k = kernel.shape
    T = x.shape[1]
    half = (k - 1) // 2

    def xhat(c: int, u: float) -> float:
        i = math.floor(u)
        f = u - i
        lo = x[c, i] if 0 <= i < T else 0.0
        hi = x[c, i + 1] if 0 <= i + 1 < T else 0.0
        return (1.0 - f) * lo + f * hi

    out = np.zeros((out_ch, T))
    for o in range(out_ch):
        for t in range(T):
            acc = 0.0
            for c in range(in_ch):
                for j in range(k):
                    acc += kernel[o, c, j] * xhat(c, t + (j - half) * d)
            out[o, t] = acc
    return out


def impulse_support_width(forward, T: int) -> int:
    """Nonzero output extent of a unit impulse fed through ``forward``."""
    x = np.zeros((1, T))
    x[0, T // 2] = 1.0
    y = forward(x)
    nz = np.flatnonzero(np.abs(y).max(axis=0) > 1e-12)
    return int(nz[-1] - nz[0] + 1)


PAIR_KERNEL = np.array([1.0, 0.0, 1.0])


def tap_pair_target(x: np.ndarray, d0: float) -> np.ndarray:
    """Teacher signal y(t) = xhat(t - d0) + xhat(t + d0), channelwise."""
    C, T = x.shape
    kern = np.zeros((C, C, 3))
    for c in range(C):
        kern[c, c, :] = PAIR_KERNEL
    out = conv1d_frac(Tensor(x), Tensor(kern), Tensor(np.float64(d0)))
    return out.data


class TapPairModel:
    """Single fractional conv with a fixed symmetric kernel; only d learns.

    Satisfies the training protocol (forward / parameters / dilation_values
    / save), which makes it usable both directly and through the trainer.
    """

    def __init__(self, channels: int, d_init: float, d_max: float = 4.0):
        kern = np.zeros((channels, channels, 3))
        for c in range(channels):
            kern[c, c, :] = PAIR_KERNEL
        self.kernel = Tensor(kern, requires_grad=False, name="pair.kernel")
        self.dilation = DilationParam(d_init, d_max, name="pair.dilation")

    def forward(self, x: Tensor) -> Tensor:
        return conv1d_frac(x, self.kernel, self.dilation)

    def parameters(self):
        return [self.dilation.tensor]

    def dilation_values(self):
        return [self.dilation.value]

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(np.float64(self.dilation.value).tobytes())


def smooth_noise(rng, channels: int, T: int, width: int = 5) -> np.ndarray:
    """Moving-average filtered noise; wide autocorrelation for recovery tasks."""
    raw = rng.normal(channels * (T + width)).reshape(channels, T + width)
    kern = np.ones(width) / width
    out = np.stack([np.convolve(raw[c], kern, mode="valid")[:T] for c in range(channels)])
    return out

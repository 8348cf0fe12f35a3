#!/usr/bin/env python3
"""Benchmark the jitted kernels against the pure-numpy fallback.

Times the three fractional-convolution primitives plus a full separator
forward+backward pass under each backend. Run directly:

    python benchmarks/bench_kernels.py [--repeats N]
"""
from __future__ import annotations

import argparse
import math
import os
import subprocess
import sys
import time

import numpy as np


def _time(fn, repeats):
    fn()  # warm (and compile, for the jitted path)
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(mod, repeats, C=64, T=4096, k=3, d=1.7):
    rng = np.random.default_rng(0)
    half = (k - 1) // 2
    pad = int(np.ceil(half * d)) + 1
    off = (np.arange(k) - half) * d
    shift = np.floor(off).astype(np.int64) + pad
    frac = off - np.floor(off)
    shift_left = (np.ceil(off) - 1.0).astype(np.int64) + pad
    taps = (np.arange(k) - half).astype(np.float64)
    xpad = np.zeros((C, T + 2 * pad))
    xpad[:, pad:pad + T] = rng.normal(size=(C, T))
    gxhat = rng.normal(size=(C * k, T))
    return {
        "frac_gather": _time(lambda: mod.frac_gather(xpad, shift, frac, T), repeats),
        "frac_scatter": _time(
            lambda: mod.frac_scatter(gxhat, shift, frac, xpad.shape[1]), repeats),
        "frac_dilation_grad": _time(
            lambda: mod.frac_dilation_grad(gxhat, xpad, shift_left, taps), repeats),
    }


def bench_model(repeats, T=4096):
    from rfsep.autodiff import Tensor, backward, mse_loss
    from rfsep.wavenet import WaveNetConfig, wavenet_init

    model = wavenet_init(WaveNetConfig(), seed=1)
    x = Tensor(np.random.default_rng(1).normal(size=(2, T)))
    target = Tensor(np.zeros((2, T)))

    def step():
        backward(mse_loss(model.forward(x), target))
        for p in model.parameters():
            p.zero_grad()

    return _time(step, repeats)


def run_backend(backend: str, repeats: int) -> None:
    os.environ["RFSEP_BACKEND"] = backend
    from rfsep import _backend
    assert _backend.BACKEND_NAME == backend
    rows = bench_kernels(_backend.kernels, repeats)
    rows["separator fwd+bwd (T=4096)"] = bench_model(max(3, repeats // 3))
    print(f"backend: {backend}")
    for name, sec in rows.items():
        print(f"  {name:32s} {sec * 1e3:9.3f} ms")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=10)
    parser.add_argument("--backend", choices=("numpy", "numba"),
                        help="run one backend in-process (used by the driver)")
    args = parser.parse_args()
    if args.backend:
        run_backend(args.backend, args.repeats)
        return 0
    # backend choice is fixed at import, so drive each in a fresh interpreter
    for backend in ("numpy", "numba"):
        subprocess.run([sys.executable, __file__, "--backend", backend,
                        "--repeats", str(args.repeats)], check=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())

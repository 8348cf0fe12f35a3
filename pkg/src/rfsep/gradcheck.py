"""Finite-difference verification of analytic gradients.

The harness projects the op output to a scalar with fixed random weights,
then compares each analytic gradient entry against a central difference
(h = 1e-5 by default, float64 throughout). It reports and never raises:
a failed check is a result, not an error.

When checking the gradient with respect to a dilation rate, pick a rate
whose tap offsets stay away from integers; the interpolation is piecewise
linear in the rate, and a difference stencil straddling a kink measures
the wrong slope.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, backward, weighted_sum, zero_grads
from .rng import CounterRng

_DENOM_FLOOR = 1e-3


@dataclass
class GradCheckReport:
    tolerance: float
    max_rel_error: float = 0.0
    per_input: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.max_rel_error < self.tolerance

    def __str__(self) -> str:
        status = "ok" if self.ok else "FAIL"
        parts = ", ".join(f"{k}={v:.3e}" for k, v in self.per_input.items())
        return (f"gradcheck {status}: max_rel_error={self.max_rel_error:.3e} "
                f"(tol {self.tolerance:.1e}) [{parts}]")


def grad_check(op, inputs: dict[str, Tensor], check: list[str] | None = None,
               tolerance: float = 1e-4, h: float = 1e-5, seed: int = 0) -> GradCheckReport:
    """Compare analytic grads of ``op(**inputs)`` against central differences.

    ``check`` selects which named inputs to differentiate (default: all
    with requires_grad). Relative error uses max(|analytic|, |numeric|,
    1e-3) as denominator so near-zero gradients are judged absolutely.
    """
    names = check if check is not None else [k for k, t in inputs.items() if t.requires_grad]
    probe = op(**inputs)
    w = CounterRng(seed).uniform(-1.0, 1.0, probe.size).reshape(probe.shape)

    def scalar_value() -> float:
        return float(np.sum(op(**inputs).data * w))

    zero_grads(inputs.values())
    backward(weighted_sum(op(**inputs), w))

    report = GradCheckReport(tolerance=tolerance)
    for name in names:
        t = inputs[name]
        analytic = t.grad.reshape(-1).copy()
        flat = t.data.reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = scalar_value()
            flat[i] = keep - h
            down = scalar_value()
            flat[i] = keep
            numeric = (up - down) / (2.0 * h)
            denom = max(abs(analytic[i]), abs(numeric), _DENOM_FLOOR)
            worst = max(worst, abs(analytic[i] - numeric) / denom)
        report.per_input[name] = worst
        report.max_rel_error = max(report.max_rel_error, worst)
    return report

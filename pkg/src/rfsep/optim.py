"""Adam optimizer with bias correction and box projection.

Parameters carrying ``bounds`` (notably dilation rates) are clipped back
into their box after every step, so constrained values stay feasible
without any reparameterization.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .errors import NonFiniteError


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m: dict[int, np.ndarray] = field(default_factory=dict)
    v: dict[int, np.ndarray] = field(default_factory=dict)


def adam_step(params: list[Tensor], state: AdamState) -> None:
    """One in-place Adam update over ``params`` using their current grads."""
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for p in params:
        g = p.grad
        if not np.isfinite(g).all():
            label = p.name or f"tensor#{p.node_id}"
            raise NonFiniteError(f"non-finite gradient in parameter {label}")
        m = state.m.get(p.node_id)
        if m is None:
            m = state.m[p.node_id] = np.zeros_like(p.data)
        v = state.v.get(p.node_id)
        if v is None:
            v = state.v[p.node_id] = np.zeros_like(p.data)
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
        if p.bounds is not None:
            np.clip(p.data, p.bounds[0], p.bounds[1], out=p.data)


class Adam:
    """Convenience wrapper pairing a parameter list with its AdamState."""

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8):
        self.params = list(params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon)

    @property
    def lr(self) -> float:
        return self.state.lr

    @lr.setter
    def lr(self, value: float) -> None:
        self.state.lr = float(value)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        adam_step(self.params, self.state)

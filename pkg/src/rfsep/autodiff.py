"""Reverse-mode automatic differentiation over float64 numpy arrays.

This is a deliberately small engine: it supports exactly the operations the
separator network needs. The centerpiece is :func:`conv1d_frac`, a "same"
padded 1-D convolution whose dilation rate is a continuous, differentiable
parameter. Fractional tap offsets are realized by linear interpolation of
the input, so the op reduces exactly to an ordinary dilated convolution at
integer rates, and the gradient with respect to the rate flows through the
interpolation weights.

Graphs are built eagerly; :func:`backward` walks them once in reverse
topological order. Gradients accumulate into ``Tensor.grad`` across calls
until an explicit ``zero_grad``. Gradient buffers materialize lazily and
the flow bookkeeping tracks buffer ownership, so pass-through ops never
copy.
"""
from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np

from ._backend import kernels
from .errors import InvalidConfigError, NonFiniteError, ShapeMismatchError

_node_counter = itertools.count()


class Tensor:
    """A float64 array plus its accumulated gradient and graph linkage.

    ``grad`` always reads as the same shape as ``data`` and is zero until a
    backward pass writes it (the buffer itself materializes on first use).
    ``bounds``, when set, is a (lo, hi) box the optimizer projects the
    value into after each step.
    """

    __slots__ = ("data", "requires_grad", "node_id", "name", "bounds",
                 "_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.node_id = next(_node_counter)
        self.name = name
        self.bounds: tuple[float, float] | None = None
        self._grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            self._grad = np.zeros_like(self.data)
        return self._grad

    @grad.setter
    def grad(self, value: np.ndarray) -> None:
        self._grad = value

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeMismatchError(f"item() needs a scalar, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self._grad = None

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"


class DilationParam:
    """A learnable dilation rate clamped to [1, d_max] by the optimizer."""

    def __init__(self, value: float, d_max: float, learnable: bool = True,
                 name: str | None = None):
        if not (1.0 <= value <= d_max):
            raise InvalidConfigError(f"dilation {value} outside [1, {d_max}]")
        self.tensor = Tensor(np.float64(value), requires_grad=learnable, name=name)
        self.tensor.bounds = (1.0, float(d_max))

    @property
    def value(self) -> float:
        return float(self.tensor.data)

    @property
    def d_max(self) -> float:
        return self.tensor.bounds[1]

    def __repr__(self) -> str:
        return f"DilationParam({self.value:.6g}, d_max={self.d_max:.6g})"


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = parents
        out._backward = backward_fn
    return out


def _accum(flow: dict, node: Tensor, delta: np.ndarray, owned: bool = True) -> None:
    """Add ``delta`` to the pending gradient of ``node``.

    ``owned`` marks a buffer nothing else references; borrowed buffers are
    never mutated, they get replaced by a fresh sum on the next accumulate.
    """
    if not node.requires_grad:
        return
    entry = flow.get(node.node_id)
    if entry is None:
        flow[node.node_id] = [delta, owned]
    elif entry[1]:
        entry[0] += delta
    else:
        entry[0] = entry[0] + delta
        entry[1] = True


def backward(loss: Tensor) -> None:
    """Fill ``grad`` on every requires_grad tensor reachable from ``loss``.

    Repeated calls without zeroing accumulate. The traversal order is a
    deterministic function of graph construction order, so gradients are
    bitwise reproducible.
    """
    if loss.data.size != 1:
        raise ShapeMismatchError(
            f"backward() needs a scalar loss, got shape {loss.shape}"
        )
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if node.node_id in seen:
            continue
        seen.add(node.node_id)
        stack.append((node, True))
        for p in node._parents:
            if p.node_id not in seen:
                stack.append((p, False))

    flow: dict[int, list] = {loss.node_id: [np.ones_like(loss.data), True]}
    for node in reversed(topo):
        entry = flow.pop(node.node_id, None)
        if entry is None:
            continue
        g, owned = entry
        if node.requires_grad:
            if node._grad is None:
                node._grad = g if owned else g.copy()
            else:
                node._grad += g
        if node._backward is not None:
            node._backward(g, flow)


def zero_grads(params) -> None:
    for p in params:
        p.zero_grad()


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _require_finite(name: str, arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{name} contains non-finite values")


def _frac_plan(d: float, k: int, pad: int):
    """Per-tap integer shifts and interpolation fractions for dilation d."""
    half = (k - 1) // 2
    taps = np.arange(k, dtype=np.float64) - half
    off = taps * d
    fl = np.floor(off)
    shift = fl.astype(np.int64) + pad
    frac = off - fl
    # left-limit interval for the dilation derivative (subgradient at kinks)
    shift_left = (np.ceil(off) - 1.0).astype(np.int64) + pad
    return taps, shift, frac, shift_left


def conv1d_frac(x: Tensor, kernel: Tensor, dilation, padding: str = "same") -> Tensor:
    """1-D convolution with centered taps at continuous offsets m*d.

    ``x`` is [in_ch, T], ``kernel`` is [out_ch, in_ch, k] with odd k, and
    ``dilation`` is a DilationParam or a scalar Tensor holding the rate d.
    Output is [out_ch, T]:

        out[o, t] = sum_{c,m} kernel[o, c, m] * xhat_c(t + m*d)

    where xhat is the zero-padded input, linearly interpolated at
    fractional positions. Gradients flow to x, kernel, and d; the rate
    gradient uses the left-limit slope where a tap offset sits exactly on
    an integer.
    """
    if padding != "same":
        raise ShapeMismatchError(f"unsupported padding policy {padding!r}")
    d_tensor = dilation.tensor if isinstance(dilation, DilationParam) else dilation
    if d_tensor.data.size != 1:
        raise ShapeMismatchError("dilation must be a scalar")
    if x.data.ndim != 2 or kernel.data.ndim != 3:
        raise ShapeMismatchError(
            f"conv1d_frac needs x [in_ch, T] and kernel [out_ch, in_ch, k]; "
            f"got {x.shape} and {kernel.shape}"
        )
    out_ch, in_ch, k = kernel.shape
    if k % 2 == 0:
        raise ShapeMismatchError(f"kernel width must be odd, got {k}")
    if in_ch != x.shape[0]:
        raise ShapeMismatchError(
            f"kernel expects {in_ch} input channels, signal has {x.shape[0]}"
        )
    T = x.shape[1]
    if T < 1:
        raise ShapeMismatchError("empty time axis")
    d = float(d_tensor.data)
    if not math.isfinite(d) or d < 1.0:
        raise InvalidConfigError(f"dilation rate {d} outside [1, d_max]")
    if d_tensor.bounds is not None and d > d_tensor.bounds[1]:
        raise InvalidConfigError(f"dilation rate {d} outside [1, {d_tensor.bounds[1]}]")
    _require_finite("conv1d_frac input", x.data)
    _require_finite("conv1d_frac kernel", kernel.data)

    half = (k - 1) // 2
    pad = int(math.ceil(half * d)) + 1
    taps, shift, frac, shift_left = _frac_plan(d, k, pad)
    Tp = T + 2 * pad

    def padded() -> np.ndarray:
        buf = np.zeros((in_ch, Tp), dtype=np.float64)
        buf[:, pad:pad + T] = x.data
        return buf

    k2 = kernel.data.reshape(out_ch, in_ch * k)
    out_data = k2 @ kernels.frac_gather(padded(), shift, frac, T)

    def _bwd(g, flow):
        # the gather is cheap; rebuilding it beats keeping it alive
        xpad = padded()
        if kernel.requires_grad:
            xhat = kernels.frac_gather(xpad, shift, frac, T)
            _accum(flow, kernel, (g @ xhat.T).reshape(out_ch, in_ch, k))
        if x.requires_grad or d_tensor.requires_grad:
            gxhat = k2.T @ g
            if x.requires_grad:
                gxpad = kernels.frac_scatter(gxhat, shift, frac, Tp)
                _accum(flow, x, gxpad[:, pad:pad + T])
            if d_tensor.requires_grad:
                gd = kernels.frac_dilation_grad(gxhat, xpad, shift_left, taps)
                _accum(flow, d_tensor, np.full_like(d_tensor.data, gd))

    return _make(out_data, (x, kernel, d_tensor), _bwd)


def conv1x1(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Pointwise channel mix: y = weight @ x (+ bias per channel)."""
    if x.data.ndim != 2 or weight.data.ndim != 2 or weight.shape[1] != x.shape[0]:
        raise ShapeMismatchError(
            f"conv1x1 shapes incompatible: weight {weight.shape}, x {x.shape}"
        )
    out = weight.data @ x.data
    parents = (x, weight)
    if bias is not None:
        if bias.shape != (weight.shape[0],):
            raise ShapeMismatchError(
                f"bias shape {bias.shape} does not match {weight.shape[0]} channels"
            )
        out += bias.data[:, None]
        parents = (x, weight, bias)

    def _bwd(g, flow):
        if weight.requires_grad:
            _accum(flow, weight, g @ x.data.T)
        if x.requires_grad:
            _accum(flow, x, weight.data.T @ g)
        if bias is not None and bias.requires_grad:
            _accum(flow, bias, g.sum(axis=1))

    return _make(out, parents, _bwd)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # exp overflow for very negative z still yields the right limit (0)
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def gated_unit(filter_in: Tensor, gate_in: Tensor) -> Tensor:
    """Elementwise tanh(filter) * sigmoid(gate)."""
    if filter_in.shape != gate_in.shape:
        raise ShapeMismatchError(
            f"gated_unit shapes differ: {filter_in.shape} vs {gate_in.shape}"
        )
    th = np.tanh(filter_in.data)
    sg = _sigmoid(gate_in.data)

    def _bwd(g, flow):
        if filter_in.requires_grad:
            _accum(flow, filter_in, g * (1.0 - th * th) * sg)
        if gate_in.requires_grad:
            _accum(flow, gate_in, g * th * (sg * (1.0 - sg)))

    return _make(th * sg, (filter_in, gate_in), _bwd)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def _bwd(g, flow):
        _accum(flow, x, g * mask)

    return _make(np.where(mask, x.data, 0.0), (x,), _bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"add shapes differ: {a.shape} vs {b.shape}")

    def _bwd(g, flow):
        _accum(flow, a, g, owned=False)
        _accum(flow, b, g, owned=False)

    return _make(a.data + b.data, (a, b), _bwd)


def smul(x: Tensor, alpha: float) -> Tensor:
    """Multiply by a python float constant."""
    alpha = float(alpha)

    def _bwd(g, flow):
        _accum(flow, x, g * alpha)

    return _make(x.data * alpha, (x,), _bwd)


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean over all elements of (pred - target)^2, as a scalar Tensor."""
    if pred.shape != target.shape:
        raise ShapeMismatchError(
            f"mse_loss shapes differ: {pred.shape} vs {target.shape}"
        )
    if target.requires_grad:
        raise ShapeMismatchError("mse_loss target must not require gradients")
    diff = pred.data - target.data
    n = diff.size
    val = np.float64(np.mean(diff * diff))

    def _bwd(g, flow):
        _accum(flow, pred, (2.0 / n) * float(g) * diff)

    return _make(val, (pred, target), _bwd)


def weighted_sum(x: Tensor, weights: np.ndarray) -> Tensor:
    """Scalar projection sum(x * weights) with constant weights."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != x.shape:
        raise ShapeMismatchError(f"weight shape {w.shape} != tensor shape {x.shape}")

    def _bwd(g, flow):
        _accum(flow, x, float(g) * w)

    return _make(np.float64(np.sum(x.data * w)), (x,), _bwd)

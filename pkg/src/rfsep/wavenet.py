"""The separator: a residual gated convolution network over I/Q sequences
whose per-block dilation rates are continuous learnable parameters.

Dataflow per block: a filter conv and a gate conv (both fractionally
dilated, sharing the block's dilation rate) feed a tanh*sigmoid gate; a
1x1 conv maps the gated output back onto the residual path, another 1x1
conv accumulates into the skip sum. The head turns the summed skips into
the 2-channel source estimate. "Same" padding is recomputed from the
current dilation every forward pass, so the output always matches the
input length.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import (DilationParam, Tensor, add, conv1d_frac, conv1x1,
                       gated_unit, relu)
from .errors import FormatError, InvalidConfigError, NonFiniteError
from .rng import CounterRng

CHECKPOINT_MAGIC = b"RFSEPCK1"


@dataclass(frozen=True)
class WaveNetConfig:
    """Separator hyperparameters.

    Desk-scale defaults; residual_channels=256 is the full-scale setting
    and is exercised by one slow test only. Initial dilation of block i is
    2^(i mod dilation_cycle_length); each rate may grow up to d_max_factor
    times its initial value when learnable_dilation is on.
    """
    residual_channels: int = 64
    skip_channels: int = 64
    kernel_size: int = 3
    num_blocks: int = 9
    dilation_cycle_length: int = 3
    d_max_factor: float = 2.0
    learnable_dilation: bool = True

    def validate(self) -> None:
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise InvalidConfigError(f"kernel_size must be odd, got {self.kernel_size}")
        if self.num_blocks < 1:
            raise InvalidConfigError(f"num_blocks must be >= 1, got {self.num_blocks}")
        if self.dilation_cycle_length < 1:
            raise InvalidConfigError(
                f"dilation_cycle_length must be >= 1, got {self.dilation_cycle_length}"
            )
        if self.residual_channels < 1 or self.skip_channels < 1:
            raise InvalidConfigError("channel counts must be positive")
        if self.d_max_factor <= 1.0:
            raise InvalidConfigError(f"d_max_factor must exceed 1, got {self.d_max_factor}")

    def initial_dilation(self, block: int) -> float:
        return float(2 ** (block % self.dilation_cycle_length))


class WaveNetModel:
    """Parameter set plus forward pass. Built by :func:`wavenet_init`."""

    def __init__(self, config: WaveNetConfig, params: dict[str, Tensor],
                 dilations: list[DilationParam]):
        self.config = config
        self.params = params
        self.dilations = dilations

    # -- parameter access ---------------------------------------------------

    def named_tensors(self) -> dict[str, Tensor]:
        """All tensors in checkpoint order, including frozen dilations."""
        out = dict(self.params)
        for i, dp in enumerate(self.dilations):
            out[f"block{i}.dilation"] = dp.tensor
        return out

    def parameters(self) -> list[Tensor]:
        """Trainable tensors in a stable order."""
        return [t for t in self.named_tensors().values() if t.requires_grad]

    def dilation_values(self) -> list[float]:
        return [dp.value for dp in self.dilations]

    def param_count(self) -> int:
        return sum(t.size for t in self.named_tensors().values())

    # -- forward ------------------------------------------------------------

    def forward(self, mixture: Tensor) -> Tensor:
        if mixture.data.ndim != 2 or mixture.shape[0] != 2:
            raise InvalidConfigError(
                f"separator input must be [2, T], got {mixture.shape}"
            )
        if not np.isfinite(mixture.data).all():
            raise NonFiniteError("separator input contains non-finite values")
        p = self.params
        h = conv1x1(mixture, p["input.weight"], p["input.bias"])
        skip_sum: Tensor | None = None
        for i, dp in enumerate(self.dilations):
            f = conv1d_frac(h, p[f"block{i}.filter.weight"], dp)
            g = conv1d_frac(h, p[f"block{i}.gate.weight"], dp)
            z = gated_unit(f, g)
            s = conv1x1(z, p[f"block{i}.skip.weight"], p[f"block{i}.skip.bias"])
            skip_sum = s if skip_sum is None else add(skip_sum, s)
            r = conv1x1(z, p[f"block{i}.res.weight"], p[f"block{i}.res.bias"])
            h = add(h, r)
        a = relu(skip_sum)
        a = conv1x1(a, p["head.0.weight"], p["head.0.bias"])
        a = relu(a)
        return conv1x1(a, p["head.1.weight"], p["head.1.bias"])

    def separate(self, mixture_channels: np.ndarray) -> np.ndarray:
        """Plain-array convenience wrapper around :meth:`forward`."""
        return self.forward(Tensor(mixture_channels)).data

    def receptive_field(self) -> float:
        return receptive_field(self)

    def save(self, path) -> None:
        save_checkpoint(self, path)


def receptive_field(model: WaveNetModel) -> float:
    """1 + (kernel_size - 1) * sum of current dilation rates.

    Fractional rates give a fractional nominal width; interpolation makes
    the actual impulse support round outward by up to one sample per
    fractionally dilated layer and side.
    """
    k = model.config.kernel_size
    return 1.0 + (k - 1) * sum(model.dilation_values())


def _uniform_fan_in(rng: CounterRng, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    a = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-a, a, int(np.prod(shape))).reshape(shape)


def wavenet_init(config: WaveNetConfig, seed: int) -> WaveNetModel:
    """Deterministic fan-in-scaled uniform init of all weights.

    Biases start at zero; dilation rates start on the cycle pattern and
    are frozen when config.learnable_dilation is false.
    """
    config.validate()
    rng = CounterRng(seed)
    R, S, k = config.residual_channels, config.skip_channels, config.kernel_size
    params: dict[str, Tensor] = {}

    def weight(name: str, shape: tuple[int, ...], fan_in: int) -> None:
        params[name] = Tensor(_uniform_fan_in(rng, shape, fan_in),
                              requires_grad=True, name=name)

    def bias(name: str, n: int) -> None:
        params[name] = Tensor(np.zeros(n), requires_grad=True, name=name)

    weight("input.weight", (R, 2), 2)
    bias("input.bias", R)
    for i in range(config.num_blocks):
        weight(f"block{i}.filter.weight", (R, R, k), R * k)
        weight(f"block{i}.gate.weight", (R, R, k), R * k)
        weight(f"block{i}.skip.weight", (S, R), R)
        bias(f"block{i}.skip.bias", S)
        weight(f"block{i}.res.weight", (R, R), R)
        bias(f"block{i}.res.bias", R)
    weight("head.0.weight", (S, S), S)
    bias("head.0.bias", S)
    weight("head.1.weight", (2, S), S)
    bias("head.1.bias", 2)

    dilations = []
    for i in range(config.num_blocks):
        d0 = config.initial_dilation(i)
        dilations.append(DilationParam(d0, d0 * config.d_max_factor,
                                       learnable=config.learnable_dilation,
                                       name=f"block{i}.dilation"))
    return WaveNetModel(config, params, dilations)


# ---------------------------------------------------------------------------
# checkpoint format: magic, u32-LE JSON length, JSON header, raw f64 payload
# ---------------------------------------------------------------------------

def save_checkpoint(model: WaveNetModel, path) -> None:
    """Write config plus all tensors (offsets relative to payload start)."""
    tensors = model.named_tensors()
    manifest = []
    offset = 0
    blobs = []
    for name, t in tensors.items():
        blob = np.ascontiguousarray(t.data, dtype="<f8").tobytes()
        manifest.append({"name": name, "shape": list(t.shape),
                         "dtype": "f64", "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"config": asdict(model.config), "tensors": manifest},
                        sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path) -> WaveNetModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise FormatError(f"bad magic in checkpoint {path}", offset=0)
    if len(raw) < 12:
        raise FormatError("truncated checkpoint header", offset=len(raw))
    (hlen,) = struct.unpack("<I", raw[8:12])
    if len(raw) < 12 + hlen:
        raise FormatError("truncated checkpoint manifest", offset=len(raw))
    try:
        header = json.loads(raw[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable checkpoint manifest: {exc}", offset=12) from exc
    config = WaveNetConfig(**header["config"])
    model = wavenet_init(config, seed=0)
    payload = raw[12 + hlen:]
    tensors = model.named_tensors()
    listed = {entry["name"] for entry in header["tensors"]}
    if listed != set(tensors):
        missing = sorted(set(tensors) - listed)
        extra = sorted(listed - set(tensors))
        raise FormatError(
            f"checkpoint manifest mismatch (missing {missing}, unexpected {extra})"
        )
    for entry in header["tensors"]:
        t = tensors[entry["name"]]
        if tuple(entry["shape"]) != t.shape or entry["dtype"] != "f64":
            raise FormatError(
                f"tensor {entry['name']} has shape {entry['shape']}, expected {list(t.shape)}"
            )
        start = entry["offset"]
        nbytes = t.size * 8
        if start + nbytes > len(payload):
            raise FormatError(
                f"payload truncated for tensor {entry['name']}",
                offset=12 + hlen + start,
            )
        t.data[...] = np.frombuffer(payload[start:start + nbytes],
                                    dtype="<f8").reshape(t.shape)
    return model

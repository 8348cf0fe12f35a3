"""Dataset synthesis, resynthesis augmentation, and the sigpack file format.

Every example is a pure function of its 64-bit seed, which is itself a
documented hash of (master_seed, split, segment, index). Regenerating a
dataset from the same spec therefore produces byte-identical files.

sigpack layout: 8-byte magic "RFSIGPK1", u32-LE manifest length, UTF-8
JSON manifest (spec echo, payload hash, per-example byte offsets and
metadata), then per example: mixture as interleaved I/Q float64 LE, the
clean source the same way, then the source bits packed 8 per byte,
LSB-first.
"""
from __future__ import annotations

import hashlib
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dsp
from .errors import FormatError, InvalidConfigError, SignalError
from .rng import CounterRng, fold

SIGPACK_MAGIC = b"RFSIGPK1"

SOI_QPSK = "qpsk"
SOI_OFDM = "ofdm_qpsk"
INTF_COMM = "comm"
INTF_EMI = "emi"
SPLITS = ("train", "val", "test")

_SPLIT_TAGS = {"train": 0x7451, "val": 0x7452, "test": 0x7453}
_TAG_SOI_BITS = 101
_TAG_INTERFERENCE = 102
_TAG_AUGMENT = 103

DEFAULT_SINR_GRID = tuple(float(v) for v in range(-15, 16, 3))


@dataclass
class MixtureExample:
    mixture: np.ndarray
    soi: np.ndarray
    bits: np.ndarray
    interference_kind: str
    sinr_db: float
    seed: int
    augmented: bool = False
    parent_seed: int | None = None


@dataclass(frozen=True)
class DatasetSpec:
    soi_kind: str = SOI_QPSK
    interference_kind: str = INTF_COMM
    n_segments: int = 2
    examples_per_segment: int = 11
    sinr_grid_db: tuple[float, ...] = DEFAULT_SINR_GRID
    example_len: int = 4096
    master_seed: int = 0
    split: str = "train"
    qpsk: dsp.QpskParams = field(default_factory=dsp.QpskParams)
    ofdm: dsp.OfdmParams = field(default_factory=dsp.OfdmParams)

    def validate(self) -> None:
        if self.soi_kind not in (SOI_QPSK, SOI_OFDM):
            raise InvalidConfigError(f"unknown soi_kind {self.soi_kind!r}")
        if self.interference_kind not in (INTF_COMM, INTF_EMI):
            raise InvalidConfigError(f"unknown interference_kind {self.interference_kind!r}")
        if self.split not in SPLITS:
            raise InvalidConfigError(f"unknown split {self.split!r}")
        if self.n_segments < 1 or self.examples_per_segment < 1:
            raise InvalidConfigError("segment and example counts must be positive")
        grid = list(self.sinr_grid_db)
        if len(grid) < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidConfigError("sinr_grid_db must be strictly increasing")
        self.soi_bit_count()  # validates example_len compatibility

    def soi_bit_count(self) -> int:
        """Bits per example implied by example_len and the source params."""
        if self.soi_kind == SOI_QPSK:
            os_ = self.qpsk.oversampling
            tails = 2 * self.qpsk.rrc_span * os_
            body = self.example_len - tails
            if body < os_ or body % os_:
                raise InvalidConfigError(
                    f"example_len {self.example_len} incompatible with QPSK shaping: "
                    f"need tails {tails} plus a positive multiple of {os_}"
                )
            return 2 * (body // os_)
        sym = self.ofdm.symbol_len
        if self.example_len % sym or self.example_len < sym:
            raise InvalidConfigError(
                f"example_len {self.example_len} must be a positive multiple of "
                f"the OFDM symbol length {sym}"
            )
        return (self.example_len // sym) * self.ofdm.active_subcarriers * 2

    def to_dict(self) -> dict:
        return {
            "soi_kind": self.soi_kind,
            "interference_kind": self.interference_kind,
            "n_segments": self.n_segments,
            "examples_per_segment": self.examples_per_segment,
            "sinr_grid_db": list(self.sinr_grid_db),
            "example_len": self.example_len,
            "master_seed": self.master_seed,
            "split": self.split,
            "qpsk": {"oversampling": self.qpsk.oversampling,
                     "rolloff": self.qpsk.rolloff,
                     "rrc_span": self.qpsk.rrc_span},
            "ofdm": {"fft_size": self.ofdm.fft_size,
                     "cp_len": self.ofdm.cp_len,
                     "active_subcarriers": self.ofdm.active_subcarriers},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        d = dict(d)
        qpsk = dsp.QpskParams(**d.pop("qpsk", {}))
        ofdm = dsp.OfdmParams(**d.pop("ofdm", {}))
        grid = tuple(float(v) for v in d.pop("sinr_grid_db", DEFAULT_SINR_GRID))
        known = {"soi_kind", "interference_kind", "n_segments", "examples_per_segment",
                 "example_len", "master_seed", "split"}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfigError(f"unknown DatasetSpec keys: {sorted(unknown)}")
        return cls(qpsk=qpsk, ofdm=ofdm, sinr_grid_db=grid, **d)


def example_seed(master_seed: int, split: str, segment: int, index: int) -> int:
    """Documented per-example hash: fold split tag, segment, then index."""
    h = fold(master_seed, _SPLIT_TAGS[split])
    h = fold(h, segment)
    return fold(h, index)


def interference_seed(ex_seed: int) -> int:
    return fold(ex_seed, _TAG_INTERFERENCE)


def _soi_from_seed(spec: DatasetSpec, ex_seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = CounterRng(fold(ex_seed, _TAG_SOI_BITS))
    n_bits = spec.soi_bit_count()
    bits = rng.bits(n_bits)
    if spec.soi_kind == SOI_QPSK:
        wave = dsp.qpsk_waveform(bits, spec.qpsk)
    else:
        wave = dsp.ofdm_modulate(bits, spec.ofdm, spec.example_len // spec.ofdm.symbol_len)
    if wave.size != spec.example_len:
        raise InvalidConfigError(
            f"source waveform length {wave.size} != example_len {spec.example_len}"
        )
    return bits, wave


def _interference_from_seed(spec: DatasetSpec, ex_seed: int) -> np.ndarray:
    seed = interference_seed(ex_seed)
    if spec.interference_kind == INTF_COMM:
        return dsp.gen_comm_surrogate(seed, spec.example_len)
    return dsp.gen_emi_surrogate(seed, spec.example_len)


def synth_example(spec: DatasetSpec, segment: int, index: int) -> MixtureExample:
    """Build one example; the target SINR is round-robin over the grid."""
    ex_seed = example_seed(spec.master_seed, spec.split, segment, index)
    sinr_db = spec.sinr_grid_db[index % len(spec.sinr_grid_db)]
    bits, soi = _soi_from_seed(spec, ex_seed)
    interference = _interference_from_seed(spec, ex_seed)
    mixture, _ = dsp.mix_at_sinr(soi, interference, sinr_db)
    return MixtureExample(mixture=mixture, soi=soi, bits=bits,
                          interference_kind=spec.interference_kind,
                          sinr_db=sinr_db, seed=ex_seed)


def generate_dataset(spec: DatasetSpec, out_path, threads: int = 1) -> dict:
    """Synthesize all examples and write one sigpack plus a JSON manifest.

    Returns the manifest dict. Workers only parallelize synthesis; the
    write is a single ordered pass, so output bytes never depend on the
    thread count.
    """
    spec.validate()
    coords = [(seg, idx) for seg in range(spec.n_segments)
              for idx in range(spec.examples_per_segment)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            examples = list(pool.map(lambda c: synth_example(spec, *c), coords))
    else:
        examples = [synth_example(spec, *c) for c in coords]
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    payload_sha = write_sigpack(examples, out_path, spec_echo=spec.to_dict())
    manifest = {
        "count": len(examples),
        "spec": spec.to_dict(),
        "sigpack": out_path.name,
        "payload_sha256": payload_sha,
    }
    manifest_path = out_path.with_suffix(out_path.suffix + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# resynthesis augmentation
# ---------------------------------------------------------------------------

def augment_resynthesize(example: MixtureExample) -> MixtureExample | None:
    """Swap the interference for a clean re-synthesis of its decoded bits.

    The embedded interference is demodulated against the generator's known
    bits; any bit error rejects the example (returns None). On acceptance
    the recovered bits are re-modulated into a fresh waveform, mixed at the
    original SINR, and the result marked augmented with a derived seed
    (parent_seed keeps the original reachable for bit-exact regeneration).
    """
    if example.interference_kind != INTF_COMM:
        raise SignalError(
            f"augmentation needs a demodulable interference, got {example.interference_kind!r}"
        )
    spec = dsp.comm_surrogate_spec(interference_seed(example.seed), example.mixture.size)
    embedded = example.mixture - example.soi
    recovered = dsp.demod_comm_surrogate(embedded, spec)
    if np.any(recovered != spec.bits):
        return None
    clean = dsp.comm_waveform_from_spec(
        dsp.CommSurrogateSpec(seed=spec.seed, length=spec.length,
                              bits=recovered, cfo=spec.cfo, params=spec.params))
    mixture, _ = dsp.mix_at_sinr(example.soi, clean, example.sinr_db)
    return MixtureExample(mixture=mixture, soi=example.soi, bits=example.bits,
                          interference_kind=example.interference_kind,
                          sinr_db=example.sinr_db,
                          seed=fold(example.seed, _TAG_AUGMENT),
                          augmented=True, parent_seed=example.seed)


# ---------------------------------------------------------------------------
# sigpack read/write
# ---------------------------------------------------------------------------

def _pack_bits(bits: np.ndarray) -> bytes:
    return np.packbits(bits.astype(np.uint8), bitorder="little").tobytes()


def _unpack_bits(blob: bytes, n_bits: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(blob, dtype=np.uint8),
                         count=n_bits, bitorder="little")


def _complex_bytes(sig: np.ndarray) -> bytes:
    flat = np.empty(2 * sig.size, dtype="<f8")
    flat[0::2] = sig.real
    flat[1::2] = sig.imag
    return flat.tobytes()


def _complex_from_bytes(blob: bytes, n: int) -> np.ndarray:
    flat = np.frombuffer(blob, dtype="<f8", count=2 * n)
    return (flat[0::2] + 1j * flat[1::2]).astype(np.complex128)


def write_sigpack(examples: list[MixtureExample], path, spec_echo: dict | None = None) -> str:
    """Write examples losslessly; returns the payload sha256 hex digest."""
    records = []
    chunks = []
    offset = 0
    for ex in examples:
        if ex.mixture.size != ex.soi.size:
            raise SignalError("mixture and source lengths differ")
        blob = (_complex_bytes(ex.mixture) + _complex_bytes(ex.soi)
                + _pack_bits(ex.bits))
        meta = {
            "offset": offset,
            "n_samples": int(ex.mixture.size),
            "n_bits": int(ex.bits.size),
            "seed": int(ex.seed),
            "sinr_db": float(ex.sinr_db),
            "interference_kind": ex.interference_kind,
            "augmented": bool(ex.augmented),
        }
        if ex.parent_seed is not None:
            meta["parent_seed"] = int(ex.parent_seed)
        records.append(meta)
        chunks.append(blob)
        offset += len(blob)
    payload = b"".join(chunks)
    manifest = {
        "format_version": 1,
        "count": len(examples),
        "spec": spec_echo,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
        "examples": records,
    }
    header = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(SIGPACK_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(payload)
    return manifest["payload_sha256"]


def read_sigpack(path) -> tuple[list[MixtureExample], dict]:
    """Read a sigpack back; returns (examples, manifest)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != SIGPACK_MAGIC:
        raise FormatError(f"bad magic in {path}", offset=0)
    if len(raw) < 12:
        raise FormatError("truncated sigpack header", offset=len(raw))
    (hlen,) = struct.unpack("<I", raw[8:12])
    if len(raw) < 12 + hlen:
        raise FormatError("truncated sigpack manifest", offset=len(raw))
    try:
        manifest = json.loads(raw[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable sigpack manifest: {exc}", offset=12) from exc
    payload = raw[12 + hlen:]
    if manifest.get("count") != len(manifest.get("examples", [])):
        raise FormatError("manifest count disagrees with example records")
    examples = []
    for meta in manifest["examples"]:
        n = meta["n_samples"]
        nb = meta["n_bits"]
        start = meta["offset"]
        need = 32 * n + (nb + 7) // 8
        if start + need > len(payload):
            raise FormatError(
                f"payload truncated for example at offset {start}",
                offset=12 + hlen + start,
            )
        mixture = _complex_from_bytes(payload[start:start + 16 * n], n)
        soi = _complex_from_bytes(payload[start + 16 * n:start + 32 * n], n)
        bits = _unpack_bits(payload[start + 32 * n:start + need], nb)
        examples.append(MixtureExample(
            mixture=mixture, soi=soi, bits=bits,
            interference_kind=meta["interference_kind"],
            sinr_db=meta["sinr_db"], seed=meta["seed"],
            augmented=meta.get("augmented", False),
            parent_seed=meta.get("parent_seed"),
        ))
    return examples, manifest

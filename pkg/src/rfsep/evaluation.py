"""BER-vs-SINR and MSE-vs-SINR evaluation of a separator.

``evaluate`` runs any separator callable over a test set grouped by SINR
level, pools bit errors per level, and averages the per-example squared
error. ``sinr_at_target_ber`` reads an operating point off a curve the way
waterfall plots are read: linearly in (SINR, log10 BER). Reports land as
one CSV per curve plus a summary JSON.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import dsp
from .datagen import SOI_OFDM, SOI_QPSK, MixtureExample
from .errors import InvalidConfigError, SignalError

NOT_REACHED = None

Separator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BerPoint:
    sinr_db: float
    ber: float
    n_bits: int


@dataclass(frozen=True)
class MsePoint:
    sinr_db: float
    mse: float
    n_examples: int


@dataclass
class BerCurve:
    points: list[BerPoint]
    label: str

    def __post_init__(self):
        _check_sorted([p.sinr_db for p in self.points], self.label)


@dataclass
class MseCurve:
    points: list[MsePoint]
    label: str

    def __post_init__(self):
        _check_sorted([p.sinr_db for p in self.points], self.label)


def _check_sorted(xs: list[float], label: str) -> None:
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise InvalidConfigError(f"curve {label!r} SINR levels must strictly increase")


def _demodulate(estimate: np.ndarray, soi_kind: str, params, n_bits: int) -> np.ndarray:
    if soi_kind == SOI_QPSK:
        return dsp.qpsk_demodulate(estimate, params, n_bits)
    if soi_kind == SOI_OFDM:
        n_symbols = n_bits // (params.active_subcarriers * 2)
        return dsp.ofdm_demodulate(estimate, params, n_symbols)
    raise InvalidConfigError(f"unknown soi_kind {soi_kind!r}")


def evaluate(separate: Separator, examples: list[MixtureExample], soi_kind: str,
             soi_params, label: str = "model",
             threads: int = 1) -> tuple[BerCurve, MseCurve]:
    """Separate every example, then pool BER and average MSE per SINR level.

    ``separate`` maps a real [2, T] mixture to a [2, T] source estimate;
    MSE is the mean over those 2T real entries against the clean source.
    """
    if not examples:
        raise SignalError("evaluate needs a non-empty example list")

    def one(ex: MixtureExample):
        est = separate(dsp.signal_to_channels(ex.mixture))
        err = est - dsp.signal_to_channels(ex.soi)
        mse = float(np.mean(err * err))
        decided = _demodulate(dsp.channels_to_signal(est), soi_kind, soi_params,
                              ex.bits.size)
        return mse, int(np.sum(decided != ex.bits))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, examples))
    else:
        results = [one(ex) for ex in examples]

    by_level: dict[float, list[tuple[float, int, int]]] = {}
    for ex, (mse, errors) in zip(examples, results):
        by_level.setdefault(ex.sinr_db, []).append((mse, errors, ex.bits.size))

    ber_points, mse_points = [], []
    for sinr in sorted(by_level):
        rows = by_level[sinr]
        n_bits = sum(r[2] for r in rows)
        errors = sum(r[1] for r in rows)
        ber_points.append(BerPoint(sinr_db=sinr, ber=errors / n_bits, n_bits=n_bits))
        mse_points.append(MsePoint(sinr_db=sinr,
                                   mse=sum(r[0] for r in rows) / len(rows),
                                   n_examples=len(rows)))
    return BerCurve(ber_points, label), MseCurve(mse_points, label)


def sinr_at_target_ber(curve: BerCurve, target_ber: float) -> float | None:
    """Lowest SINR where the curve first crosses down through the target.

    Interpolation is linear in (SINR, log10 BER); measured zeros are
    clamped to 1/(2 n_bits) for the log only. Returns NOT_REACHED (None)
    when the curve never reaches the target.
    """
    if len(curve.points) < 2:
        raise InvalidConfigError("sinr_at_target_ber needs at least 2 points")
    if not (0.0 < target_ber < 1.0):
        raise InvalidConfigError(f"target_ber must be in (0, 1), got {target_ber}")

    def log_ber(p: BerPoint) -> float:
        return math.log10(p.ber if p.ber > 0 else 0.5 / p.n_bits)

    lt = math.log10(target_ber)
    pts = curve.points
    if pts[0].ber <= target_ber:
        return pts[0].sinr_db
    for a, b in zip(pts, pts[1:]):
        if b.ber <= target_ber:  # first downward crossing
            la, lb = log_ber(a), log_ber(b)
            if lb == la:
                return b.sinr_db
            frac = (lt - la) / (lb - la)
            return a.sinr_db + frac * (b.sinr_db - a.sinr_db)
    return NOT_REACHED


def percent_improvement(base_sinr_db: float, new_sinr_db: float) -> float:
    """100 * (base - new) / base, a ratio of dB operating points."""
    if base_sinr_db <= 0:
        raise InvalidConfigError(
            f"percent_improvement needs base_sinr_db > 0, got {base_sinr_db}"
        )
    return 100.0 * (base_sinr_db - new_sinr_db) / base_sinr_db


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------

def _slug(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in label.lower())


def _write_curve_csv(path: Path, rows: list[tuple[float, float, int]]) -> None:
    lines = ["sinr_db,metric,n"]
    for sinr, metric, n in rows:
        lines.append(f"{sinr:.12g},{metric:.12g},{n}")
    path.write_text("\n".join(lines) + "\n")


def emit_report(curves: list[BerCurve | MseCurve], comparisons: list[dict],
                out_dir) -> list[Path]:
    """Write one CSV per curve and a summary JSON with the comparisons.

    Each comparison entry holds a name, a baseline BerCurve, a candidate
    BerCurve, and a target BER; the summary records both operating points
    and the percent improvement (null when either side never reaches the
    target or the baseline point is not positive).
    """
    if not curves:
        raise InvalidConfigError("emit_report needs at least one curve")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for curve in curves:
        kind = "ber" if isinstance(curve, BerCurve) else "mse"
        path = out_dir / f"{_slug(curve.label)}_{kind}.csv"
        if isinstance(curve, BerCurve):
            rows = [(p.sinr_db, p.ber, p.n_bits) for p in curve.points]
        else:
            rows = [(p.sinr_db, p.mse, p.n_examples) for p in curve.points]
        _write_curve_csv(path, rows)
        written.append(path)

    summary: dict = {"comparisons": []}
    for comp in comparisons:
        base = sinr_at_target_ber(comp["baseline"], comp["target_ber"])
        cand = sinr_at_target_ber(comp["candidate"], comp["target_ber"])
        entry = {
            "name": comp["name"],
            "target_ber": comp["target_ber"],
            "baseline_label": comp["baseline"].label,
            "candidate_label": comp["candidate"].label,
            "baseline_sinr_db": base,
            "candidate_sinr_db": cand,
            "improvement_pct": None,
        }
        if base is not None and cand is not None and base > 0:
            entry["improvement_pct"] = percent_improvement(base, cand)
        summary["comparisons"].append(entry)
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written.append(summary_path)
    return written


def parse_curve_csv(path) -> list[tuple[float, float, int]]:
    """Read back a curve CSV written by emit_report."""
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != "sinr_db,metric,n":
        raise InvalidConfigError(f"unexpected CSV header in {path}")
    out = []
    for line in lines[1:]:
        sinr, metric, n = line.split(",")
        out.append((float(sinr), float(metric), int(n)))
    return out

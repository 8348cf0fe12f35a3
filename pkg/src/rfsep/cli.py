"""Command-line entry point wiring the full pipeline.

One JSON config file carries the dataset / model / train / eval sections;
repeatable ``--set section.key=value`` flags override individual fields.
Every run echoes its effective config into the output directory before
doing work and writes a manifest (seeds, output hashes, wall time) after.

Exit codes: 0 success, 1 structured error, 2 invalid usage.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import datagen, evaluation
from .errors import InvalidConfigError, RfsepError
from .train import TrainConfig, train
from .wavenet import WaveNetConfig, load_checkpoint, wavenet_init

_SECTIONS = ("dataset", "model", "train", "eval")
_EVAL_KEYS = {"target_ber", "label"}


def _parse_override(text: str) -> tuple[list[str], object]:
    if "=" not in text:
        raise InvalidConfigError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    path = key.strip().split(".")
    if len(path) < 2:
        raise InvalidConfigError(f"--set key must be section.field, got {key!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def load_config(path: str | None, overrides: list[str]) -> dict:
    config: dict = {}
    if path is not None:
        config = json.loads(Path(path).read_text())
    unknown = set(config) - set(_SECTIONS)
    if unknown:
        raise InvalidConfigError(f"unknown config sections: {sorted(unknown)}")
    for text in overrides or []:
        keys, value = _parse_override(text)
        if keys[0] not in _SECTIONS:
            raise InvalidConfigError(f"unknown config section {keys[0]!r}")
        node = config
        for k in keys[:-1]:
            node = node.setdefault(k, {})
        node[keys[-1]] = value
    _reject_unknown_keys(config)
    return config


def _reject_unknown_keys(config: dict) -> None:
    """Unknown keys fail fast in every section, used by the subcommand or not."""
    if "dataset" in config:
        datagen.DatasetSpec.from_dict(config["dataset"])
    for section, fields in (("model", set(WaveNetConfig.__dataclass_fields__)),
                            ("train", set(TrainConfig.__dataclass_fields__)),
                            ("eval", _EVAL_KEYS)):
        bad = set(config.get(section, {})) - fields
        if bad:
            raise InvalidConfigError(f"unknown {section} keys: {sorted(bad)}")


def _dataset_spec(config: dict) -> datagen.DatasetSpec:
    spec = datagen.DatasetSpec.from_dict(config.get("dataset", {}))
    spec.validate()
    return spec


def _model_config(config: dict) -> WaveNetConfig:
    section = config.get("model", {})
    known = set(WaveNetConfig.__dataclass_fields__)
    unknown = set(section) - known
    if unknown:
        raise InvalidConfigError(f"unknown model keys: {sorted(unknown)}")
    cfg = WaveNetConfig(**section)
    cfg.validate()
    return cfg


def _train_config(config: dict, out_dir: Path) -> TrainConfig:
    section = dict(config.get("train", {}))
    known = set(TrainConfig.__dataclass_fields__)
    unknown = set(section) - known
    if unknown:
        raise InvalidConfigError(f"unknown train keys: {sorted(unknown)}")
    section.setdefault("checkpoint_path", str(out_dir / "model.ckpt"))
    cfg = TrainConfig(**section)
    cfg.validate()
    return cfg


def _echo_config(config: dict, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "config.echo.json"
    path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, subcommand: str, config: dict,
                    outputs: list[Path], started: float, extra: dict | None = None) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "outputs": {p.name: _sha256(p) for p in sorted(outputs)},
        "wall_time_s": time.time() - started,
    }
    if extra:
        manifest.update(extra)
    (out_dir / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("RFSEP_THREADS", "")
    return max(1, int(env)) if env.strip() else 1


def _load_examples(path: str) -> tuple[list, dict]:
    examples, manifest = datagen.read_sigpack(path)
    if not manifest.get("spec"):
        raise InvalidConfigError(f"sigpack {path} carries no dataset spec echo")
    return examples, manifest


def _spec_demod(manifest: dict):
    spec = datagen.DatasetSpec.from_dict(manifest["spec"])
    params = spec.qpsk if spec.soi_kind == datagen.SOI_QPSK else spec.ofdm
    return spec.soi_kind, params


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_gen(args) -> int:
    started = time.time()
    config = load_config(args.config, args.set)
    spec = _dataset_spec(config)
    out_dir = Path(args.out)
    _echo_config(config, out_dir)
    sig_path = out_dir / f"{spec.split}.sigpack"
    datagen.generate_dataset(spec, sig_path, threads=_threads(args))
    _write_manifest(out_dir, "gen", config,
                    [sig_path, sig_path.with_suffix(".sigpack.manifest.json")],
                    started, extra={"master_seed": spec.master_seed})
    print(f"wrote {spec.n_segments * spec.examples_per_segment} examples to {sig_path}")
    return 0


def _cmd_augment(args) -> int:
    started = time.time()
    config = load_config(args.config, args.set)
    out_dir = Path(args.out)
    _echo_config(config, out_dir)
    examples, manifest = _load_examples(args.data)
    accepted, rejected = [], 0
    for ex in examples:
        out = datagen.augment_resynthesize(ex)
        if out is None:
            rejected += 1
        else:
            accepted.append(out)
    sig_path = out_dir / "augmented.sigpack"
    datagen.write_sigpack(accepted, sig_path, spec_echo=manifest.get("spec"))
    _write_manifest(out_dir, "augment", config, [sig_path], started,
                    extra={"accepted": len(accepted), "rejected": rejected})
    print(f"augmented {len(accepted)} examples ({rejected} rejected) -> {sig_path}")
    return 0


def _cmd_train(args) -> int:
    started = time.time()
    config = load_config(args.config, args.set)
    out_dir = Path(args.out)
    _echo_config(config, out_dir)
    model_cfg = _model_config(config)
    train_cfg = _train_config(config, out_dir)
    train_set, _ = _load_examples(args.data)
    val_set, _ = _load_examples(args.val)
    model = wavenet_init(model_cfg, seed=train_cfg.seed)
    history_path = out_dir / "history.jsonl"
    ckpt, history = train(model, train_set, val_set, train_cfg,
                          history_path=history_path)
    _write_manifest(out_dir, "train", config, [Path(ckpt), history_path], started,
                    extra={"best_val": history.best_val,
                           "best_epoch": history.best_epoch,
                           "stop_reason": history.stop_reason})
    print(f"best val loss {history.best_val:.6g} at epoch {history.best_epoch}; "
          f"checkpoint {ckpt}")
    return 0


def _cmd_eval(args) -> int:
    started = time.time()
    config = load_config(args.config, args.set)
    out_dir = Path(args.out)
    _echo_config(config, out_dir)
    examples, manifest = _load_examples(args.data)
    soi_kind, params = _spec_demod(manifest)
    model = load_checkpoint(args.ckpt)
    label = config.get("eval", {}).get("label", "model")
    ber, mse = evaluation.evaluate(model.separate, examples, soi_kind, params,
                                   label=label, threads=_threads(args))
    written = evaluation.emit_report([ber, mse], [], out_dir)
    _write_manifest(out_dir, "eval", config, written, started)
    print(f"evaluated {len(examples)} examples over {len(ber.points)} SINR levels")
    return 0


def _cmd_compare(args) -> int:
    started = time.time()
    config = load_config(args.config, args.set)
    out_dir = Path(args.out)
    _echo_config(config, out_dir)
    examples, manifest = _load_examples(args.data)
    soi_kind, params = _spec_demod(manifest)
    target_ber = args.target_ber
    if target_ber is None:
        target_ber = config.get("eval", {}).get("target_ber", 1e-3)
    base_model = load_checkpoint(args.baseline)
    cand_model = load_checkpoint(args.candidate)
    threads = _threads(args)
    base_ber, base_mse = evaluation.evaluate(base_model.separate, examples, soi_kind,
                                             params, label="baseline", threads=threads)
    cand_ber, cand_mse = evaluation.evaluate(cand_model.separate, examples, soi_kind,
                                             params, label="candidate", threads=threads)
    written = evaluation.emit_report(
        [base_ber, base_mse, cand_ber, cand_mse],
        [{"name": "candidate_vs_baseline", "baseline": base_ber,
          "candidate": cand_ber, "target_ber": target_ber}],
        out_dir)
    _write_manifest(out_dir, "compare", config, written, started)
    summary = json.loads((out_dir / "summary.json").read_text())
    print(json.dumps(summary["comparisons"][0], indent=2, sort_keys=True))
    return 0


def _cmd_gradcheck(args) -> int:
    import numpy as np

    from .autodiff import DilationParam, Tensor, conv1d_frac, gated_unit, mse_loss
    from .gradcheck import grad_check
    from .rng import CounterRng

    rng = CounterRng(args.seed)
    failures = 0
    for case, d in enumerate((1.3, 1.5, 2.7)):
        x = Tensor(rng.normal(2 * 24).reshape(2, 24), requires_grad=True)
        k = Tensor(rng.normal(3 * 2 * 3).reshape(3, 2, 3) * 0.5, requires_grad=True)
        dil = DilationParam(d, 4.0)
        report = grad_check(
            lambda x, kernel, dilation: conv1d_frac(x, kernel, dilation),
            {"x": x, "kernel": k, "dilation": dil.tensor}, tolerance=1e-4,
            seed=args.seed + case)
        print(f"conv1d_frac d={d}: {report}")
        failures += not report.ok
    f = Tensor(rng.normal(12).reshape(3, 4), requires_grad=True)
    g = Tensor(rng.normal(12).reshape(3, 4), requires_grad=True)
    report = grad_check(gated_unit, {"filter_in": f, "gate_in": g}, tolerance=1e-6)
    print(f"gated_unit: {report}")
    failures += not report.ok
    pred = Tensor(rng.normal(10).reshape(2, 5), requires_grad=True)
    target = Tensor(rng.normal(10).reshape(2, 5))
    report = grad_check(mse_loss, {"pred": pred, "target": target},
                        check=["pred"], tolerance=1e-8)
    print(f"mse_loss: {report}")
    failures += not report.ok
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rfsep",
        description="RF co-channel source separation pipeline",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a config field (repeatable)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (or RFSEP_THREADS)")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("gen", help="synthesize a dataset")
    common(p)
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("augment", help="resynthesis augmentation of a dataset")
    common(p)
    p.add_argument("--data", required=True, help="input sigpack")
    p.set_defaults(fn=_cmd_augment)

    p = sub.add_parser("train", help="train the separator")
    common(p)
    p.add_argument("--data", required=True, help="training sigpack")
    p.add_argument("--val", required=True, help="validation sigpack")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="BER/MSE curves for a checkpoint")
    common(p)
    p.add_argument("--ckpt", required=True, help="model checkpoint")
    p.add_argument("--data", required=True, help="test sigpack")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("compare", help="compare two checkpoints at a target BER")
    common(p)
    p.add_argument("--baseline", required=True)
    p.add_argument("--candidate", required=True)
    p.add_argument("--data", required=True, help="test sigpack")
    p.add_argument("--target-ber", type=float, default=None)
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except RfsepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

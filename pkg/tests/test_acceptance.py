"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Criterion 6 is the long one (it trains six desk-scale separators)
and carries the ``slow`` marker; everything else finishes in seconds.
"""
import math
import time

import numpy as np
import pytest

from rfsep import datagen, dsp, evaluation
from rfsep.autodiff import DilationParam, Tensor, backward, conv1d_frac, mse_loss
from rfsep.gradcheck import grad_check
from rfsep.optim import Adam
from rfsep.rng import CounterRng
from rfsep.train import TrainConfig, train
from rfsep.wavenet import WaveNetConfig, load_checkpoint, wavenet_init

from helpers import (TapPairModel, oracle_int_dilated_conv, smooth_noise,
                     tap_pair_target)


def _report(num, ok, detail):
    line = f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


def test_criterion_1_gradient_correctness():
    started = time.perf_counter()
    rng = CounterRng(1001)
    worst = 0.0
    cases = 0
    for d in (1.3, 1.5, 2.7):
        for rep in range(17):
            in_ch = 1 + rep % 3
            out_ch = 1 + (rep + 1) % 3
            T = 8 + rep % 9
            x = Tensor(rng.normal(in_ch * T).reshape(in_ch, T), requires_grad=True)
            kern = Tensor(rng.normal(out_ch * in_ch * 3).reshape(out_ch, in_ch, 3),
                          requires_grad=True)
            dil = DilationParam(d, 4.0)
            report = grad_check(
                lambda x, kernel, dilation: conv1d_frac(x, kernel, dilation),
                {"x": x, "kernel": kern, "dilation": dil.tensor},
                tolerance=1e-4, seed=1000 + cases)
            worst = max(worst, report.max_rel_error)
            cases += 1
    elapsed = time.perf_counter() - started
    _report(1, cases >= 50 and worst < 1e-4 and elapsed < 10.0,
            f"{cases} cases, max rel err {worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_integer_equivalence():
    started = time.perf_counter()
    rng = CounterRng(1002)
    worst = 0.0
    cases = 0
    for d in (1, 2, 4, 8):
        for rep in range(26):
            in_ch = 1 + rep % 3
            out_ch = 1 + (rep + 2) % 3
            k = 3 if rep % 2 else 5
            T = 6 + rep % 24
            x = rng.normal(in_ch * T).reshape(in_ch, T)
            kern = rng.normal(out_ch * in_ch * k).reshape(out_ch, in_ch, k)
            got = conv1d_frac(Tensor(x), Tensor(kern), Tensor(np.float64(d))).data
            want = oracle_int_dilated_conv(x, kern, d)
            worst = max(worst, float(np.max(np.abs(got - want))))
            cases += 1
    elapsed = time.perf_counter() - started
    _report(2, cases >= 100 and worst < 1e-12 and elapsed < 5.0,
            f"{cases} cases, max abs err {worst:.2e}, {elapsed:.1f}s")


def test_criterion_3_dilation_recovery():
    started = time.perf_counter()
    results = []
    for d0 in (1.3, 2.7):
        for seed in (1, 2, 3):
            x = smooth_noise(CounterRng(3000 + seed), 1, 512)
            target = Tensor(tap_pair_target(x, d0))
            model = TapPairModel(1, d_init=2.0)
            opt = Adam(model.parameters(), lr=0.02)
            xt = Tensor(x)
            for _ in range(2000):
                opt.zero_grad()
                backward(mse_loss(model.forward(xt), target))
                opt.step()
            results.append((d0, seed, abs(model.dilation.value - d0)))
    elapsed = time.perf_counter() - started
    ok = all(err < 0.05 for _, _, err in results) and elapsed < 60.0
    detail = ", ".join(f"d0={d0} s{seed}: |err|={err:.4f}"
                       for d0, seed, err in results)
    _report(3, ok, f"{detail}, {elapsed:.1f}s")


def test_criterion_4_dsp_roundtrips_and_sinr():
    started = time.perf_counter()
    rng = CounterRng(1004)

    qp = dsp.QpskParams()
    bits = rng.bits(10_000)
    qpsk_errors = int(np.sum(
        dsp.qpsk_demodulate(dsp.qpsk_waveform(bits, qp), qp, bits.size) != bits))

    op = dsp.OfdmParams()
    n_sym = math.ceil(10_000 / (op.active_subcarriers * 2))
    obits = rng.bits(n_sym * op.active_subcarriers * 2)
    ofdm_errors = int(np.sum(
        dsp.ofdm_demodulate(dsp.ofdm_modulate(obits, op, n_sym), op, n_sym) != obits))

    soi = rng.normal_complex(4096)
    intf = rng.normal_complex(4096)
    worst_db = 0.0
    grid = datagen.DEFAULT_SINR_GRID
    for sinr in grid:
        mixture, _ = dsp.mix_at_sinr(soi, intf, sinr)
        measured = 10 * math.log10(
            dsp.mean_power(soi) / dsp.mean_power(mixture - soi))
        worst_db = max(worst_db, abs(measured - sinr))
    elapsed = time.perf_counter() - started
    ok = (qpsk_errors == 0 and ofdm_errors == 0 and len(grid) == 11
          and worst_db < 1e-9 and elapsed < 10.0)
    _report(4, ok, f"qpsk_errors={qpsk_errors}, ofdm_errors={ofdm_errors}, "
                   f"max sinr err {worst_db:.2e} dB over {len(grid)} levels, "
                   f"{elapsed:.1f}s")


def test_criterion_5_augmentation_fidelity():
    started = time.perf_counter()
    spec = datagen.DatasetSpec(
        soi_kind="qpsk", interference_kind="comm", n_segments=10,
        examples_per_segment=10, example_len=4096, master_seed=55)
    accepted = 0
    redemod_clean = 0
    sinr_ok = 0
    total = 0
    for seg in range(spec.n_segments):
        for idx in range(spec.examples_per_segment):
            ex = datagen.synth_example(spec, seg, idx)
            total += 1
            out = datagen.augment_resynthesize(ex)
            if out is None:
                continue
            accepted += 1
            surrogate = dsp.comm_surrogate_spec(
                datagen.interference_seed(ex.seed), ex.mixture.size)
            back = dsp.demod_comm_surrogate(out.mixture - out.soi, surrogate)
            redemod_clean += int(np.array_equal(back, surrogate.bits))
            measured = 10 * math.log10(
                dsp.mean_power(out.soi) / dsp.mean_power(out.mixture - out.soi))
            sinr_ok += int(abs(measured - ex.sinr_db) < 1e-9)
    elapsed = time.perf_counter() - started
    ok = (total == 100 and accepted == 100 and redemod_clean == 100
          and sinr_ok == 100 and elapsed < 30.0)
    _report(5, ok, f"accepted {accepted}/100, clean redemod {redemod_clean}, "
                   f"sinr preserved {sinr_ok}, {elapsed:.1f}s")


@pytest.mark.slow
def test_criterion_6_desk_scale_separation(tmp_path):
    # direction check of the separation claim: the dilation-learnable model
    # must beat the identity separator everywhere and the frozen-dilation
    # twin by >= 10% mean MSE (median over 3 seeds), trained under 30 min
    def dataset(split, n_segments):
        spec = datagen.DatasetSpec(
            soi_kind="qpsk", interference_kind="comm", n_segments=n_segments,
            examples_per_segment=11, example_len=4096, master_seed=66,
            split=split)
        return [datagen.synth_example(spec, s, i)
                for s in range(n_segments) for i in range(11)]

    train_set = dataset("train", 30)
    val_set = dataset("val", 5)
    test_set = dataset("test", 10)
    assert len(train_set) >= 200 and len(val_set) >= 50 and len(test_set) >= 50

    null_mse = {}
    for ex in test_set:
        err = dsp.signal_to_channels(ex.mixture - ex.soi)
        null_mse.setdefault(ex.sinr_db, []).append(float(np.mean(err * err)))
    null_mse = {k: float(np.mean(v)) for k, v in null_mse.items()}

    def run(seed, learnable):
        model = wavenet_init(WaveNetConfig(learnable_dilation=learnable), seed=seed)
        cfg = TrainConfig(
            max_epochs=10, batch_size=2, steps_per_epoch=110, lr=2e-3,
            dilation_lr=2e-2, plateau_patience=3, early_stop_patience=12,
            min_lr=1e-5, seed=seed,
            checkpoint_path=str(tmp_path / f"m{seed}{int(learnable)}.ckpt"))
        t0 = time.perf_counter()
        ckpt, _ = train(model, train_set, val_set, cfg)
        train_time = time.perf_counter() - t0
        best = load_checkpoint(ckpt)
        _, mse = evaluation.evaluate(best.separate, test_set, "qpsk",
                                     dsp.QpskParams(), label="m")
        return {p.sinr_db: p.mse for p in mse.points}, train_time

    per_seed_gain = []
    per_seed_levels = []
    max_train_time = 0.0
    for seed in (1, 2, 3):
        learn_mse, t_learn = run(seed, True)
        fixed_mse, t_fixed = run(seed, False)
        max_train_time = max(max_train_time, t_learn, t_fixed)
        mean_learn = float(np.mean(list(learn_mse.values())))
        mean_fixed = float(np.mean(list(fixed_mse.values())))
        per_seed_gain.append(100.0 * (mean_fixed - mean_learn) / mean_fixed)
        per_seed_levels.append(learn_mse)

    median_gain = float(np.median(per_seed_gain))
    median_levels = {s: float(np.median([lv[s] for lv in per_seed_levels]))
                     for s in null_mse}
    beats_null = all(median_levels[s] < null_mse[s] for s in null_mse)
    ok = beats_null and median_gain >= 10.0 and max_train_time < 1800.0
    _report(6, ok, f"beats null everywhere={beats_null}, "
                   f"per-seed gain {['%.1f%%' % g for g in per_seed_gain]}, "
                   f"median {median_gain:.1f}%, "
                   f"max train time {max_train_time:.0f}s")


def test_criterion_7_headline_arithmetic():
    a = evaluation.percent_improvement(15.0, 10.0)
    b = evaluation.percent_improvement(17.0, 7.0)
    ok = abs(a - 33.33) <= 0.01 and abs(b - 58.82) <= 0.01
    _report(7, ok, f"(15,10) -> {a:.4f}%, (17,7) -> {b:.4f}%")


def test_criterion_8_reproducibility(tmp_path):
    from rfsep.cli import main

    config = {
        "dataset": {"soi_kind": "qpsk", "interference_kind": "comm",
                    "n_segments": 2, "examples_per_segment": 4,
                    "sinr_grid_db": [-6.0, 0.0, 6.0], "example_len": 512,
                    "master_seed": 88, "split": "train",
                    "qpsk": {"oversampling": 4, "rolloff": 0.5, "rrc_span": 4}},
        "model": {"residual_channels": 6, "skip_channels": 6, "num_blocks": 2,
                  "dilation_cycle_length": 2},
        "train": {"max_epochs": 2, "batch_size": 2, "steps_per_epoch": 3,
                  "lr": 0.003, "seed": 4},
    }
    import json
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))

    def pipeline(tag):
        root = tmp_path / tag
        assert main(["gen", "--config", str(cfg_path), "--out", str(root / "tr")]) == 0
        assert main(["gen", "--config", str(cfg_path), "--out", str(root / "va"),
                     "--set", "dataset.split=val"]) == 0
        assert main(["gen", "--config", str(cfg_path), "--out", str(root / "te"),
                     "--set", "dataset.split=test"]) == 0
        assert main(["train", "--config", str(cfg_path), "--out", str(root / "run"),
                     "--data", str(root / "tr" / "train.sigpack"),
                     "--val", str(root / "va" / "val.sigpack")]) == 0
        assert main(["eval", "--config", str(cfg_path), "--out", str(root / "ev"),
                     "--ckpt", str(root / "run" / "model.ckpt"),
                     "--data", str(root / "te" / "test.sigpack")]) == 0
        return {
            "sigpack": (root / "tr" / "train.sigpack").read_bytes(),
            "ckpt": (root / "run" / "model.ckpt").read_bytes(),
            "ber": (root / "ev" / "model_ber.csv").read_bytes(),
            "mse": (root / "ev" / "model_mse.csv").read_bytes(),
        }

    a = pipeline("a")
    b = pipeline("b")
    same = {k: a[k] == b[k] for k in a}
    _report(8, all(same.values()),
            "byte-identical: " + ", ".join(f"{k}={v}" for k, v in same.items()))

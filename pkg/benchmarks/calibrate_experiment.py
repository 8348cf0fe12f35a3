#!/usr/bin/env python3
"""Calibration driver for the desk-scale separation experiment.

Trains the dilation-learnable separator against the frozen-dilation
baseline on the same data and budget, then prints per-level test MSE for
both alongside the null (mixture-as-estimate) reference.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from rfsep import datagen, dsp, evaluation
from rfsep.train import TrainConfig, train
from rfsep.wavenet import WaveNetConfig, load_checkpoint, wavenet_init


def build_sets(example_len=4096, train_segments=20, eval_segments=5, master_seed=11):
    def spec(split, n_seg):
        return datagen.DatasetSpec(
            soi_kind="qpsk", interference_kind="comm", n_segments=n_seg,
            examples_per_segment=11, example_len=example_len,
            master_seed=master_seed, split=split)

    sets = {}
    for split, n_seg in (("train", train_segments), ("val", eval_segments),
                         ("test", eval_segments)):
        s = spec(split, n_seg)
        sets[split] = [datagen.synth_example(s, seg, i)
                       for seg in range(n_seg) for i in range(11)]
    return sets


def run_one(sets, seed, learnable, epochs, steps, batch, lr, dil_lr, tmp):
    cfg = WaveNetConfig(learnable_dilation=learnable)
    model = wavenet_init(cfg, seed=seed)
    tcfg = TrainConfig(max_epochs=epochs, batch_size=batch, steps_per_epoch=steps,
                       lr=lr, dilation_lr=dil_lr, seed=seed,
                       plateau_patience=3, early_stop_patience=10, min_lr=1e-5,
                       checkpoint_path=f"{tmp}/model_{learnable}_{seed}.ckpt")
    t0 = time.time()
    ckpt, history = train(model, sets["train"], sets["val"], tcfg)
    elapsed = time.time() - t0
    best = load_checkpoint(ckpt)
    _, mse = evaluation.evaluate(best.separate, sets["test"], "qpsk",
                                 dsp.QpskParams(), label="m")
    return mse, history, elapsed, best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, nargs="+", default=[1])
    ap.add_argument("--epochs", type=int, default=5)
    ap.add_argument("--steps", type=int, default=40)
    ap.add_argument("--batch", type=int, default=4)
    ap.add_argument("--lr", type=float, default=2e-3)
    ap.add_argument("--dil-lr", type=float, default=2e-2)
    ap.add_argument("--train-segments", type=int, default=20)
    ap.add_argument("--tmp", default="/tmp/calib")
    args = ap.parse_args()

    import os
    os.makedirs(args.tmp, exist_ok=True)
    t0 = time.time()
    sets = build_sets(train_segments=args.train_segments)
    print(f"data built in {time.time()-t0:.1f}s "
          f"({len(sets['train'])}/{len(sets['val'])}/{len(sets['test'])})")

    null_mse = {}
    for ex in sets["test"]:
        err = dsp.signal_to_channels(ex.mixture - ex.soi)
        null_mse.setdefault(ex.sinr_db, []).append(float(np.mean(err * err)))
    null_mse = {k: float(np.mean(v)) for k, v in sorted(null_mse.items())}

    for seed in args.seeds:
        results = {}
        for learnable in (True, False):
            mse, history, elapsed, best = run_one(
                sets, seed, learnable, args.epochs, args.steps, args.batch,
                args.lr, args.dil_lr, args.tmp)
            tag = "learn" if learnable else "fixed"
            results[tag] = {p.sinr_db: p.mse for p in mse.points}
            print(f"seed {seed} {tag}: {elapsed:.0f}s, "
                  f"best_val={history.best_val:.5f}, "
                  f"dil={['%.2f' % v for v in best.dilation_values()]}")
        print(f"{'sinr':>6} {'null':>10} {'fixed':>10} {'learn':>10} {'gain%':>7}")
        gains = []
        beats_null = True
        for sinr in sorted(null_mse):
            f = results["fixed"][sinr]
            l = results["learn"][sinr]
            gains.append(100 * (f - l) / f)
            beats_null &= l < null_mse[sinr]
            print(f"{sinr:6.0f} {null_mse[sinr]:10.5f} {f:10.5f} {l:10.5f} "
                  f"{gains[-1]:7.1f}")
        mean_fixed = np.mean(list(results["fixed"].values()))
        mean_learn = np.mean(list(results["learn"].values()))
        print(f"seed {seed}: beats_null_everywhere={beats_null} "
              f"mean_mse fixed={mean_fixed:.5f} learn={mean_learn:.5f} "
              f"improvement={100*(mean_fixed-mean_learn)/mean_fixed:.1f}%")


if __name__ == "__main__":
    main()

"""Supervised training: squared-error objective, periodic validation,
learning-rate reduction on plateau, early stopping, best checkpointing.

``train`` is generic over the model: anything with ``forward(Tensor) ->
Tensor``, ``parameters()``, ``dilation_values()`` and ``save(path)``
trains here (the separator and the single-layer test models both
qualify). Dilation tensors get their own Adam instance so their step
size can differ from the weights'; both learning rates shrink together
on plateau.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tensor, backward, mse_loss, smul
from .dsp import signal_to_channels
from .errors import InvalidConfigError, NonFiniteError, TrainAbortError
from .optim import Adam
from .rng import CounterRng

ACTION_NONE = "none"
ACTION_REDUCE_LR = "reduce_lr"
ACTION_STOP = "stop"

STOP_MAX_EPOCHS = "max_epochs"
STOP_EARLY = "early_stop"

_IMPROVEMENT_RTOL = 1e-4


@dataclass
class TrainConfig:
    max_epochs: int = 10
    batch_size: int = 4
    steps_per_epoch: int = 50
    lr: float = 1e-3
    plateau_factor: float = 0.5
    plateau_patience: int = 3
    early_stop_patience: int = 8
    min_lr: float = 1e-5
    seed: int = 0
    checkpoint_path: str = "model.ckpt"
    dilation_lr: float | None = None  # defaults to lr

    def validate(self) -> None:
        if self.max_epochs < 1 or self.batch_size < 1 or self.steps_per_epoch < 1:
            raise InvalidConfigError("epoch, batch, and step counts must be positive")
        if not (0.0 < self.plateau_factor < 1.0):
            raise InvalidConfigError(f"plateau_factor must be in (0,1), got {self.plateau_factor}")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise InvalidConfigError("patience values must be >= 1")
        if not (self.min_lr < self.lr):
            raise InvalidConfigError(f"min_lr {self.min_lr} must be below lr {self.lr}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float
    dilations: list[float]


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    best_val: float = math.inf
    best_epoch: int = -1
    stop_reason: str = STOP_MAX_EPOCHS


class PlateauController:
    """Non-improvement bookkeeping shared by LR reduction and early stop.

    An epoch improves when val < best * (1 - 1e-4). Both counters reset on
    improvement; the plateau counter also resets when it fires.
    """

    def __init__(self, plateau_patience: int, early_stop_patience: int):
        self.plateau_patience = plateau_patience
        self.early_stop_patience = early_stop_patience
        self.best = math.inf
        self.bad_plateau = 0
        self.bad_early = 0

    def update(self, val_loss: float, lr_at_floor: bool) -> str:
        if not math.isfinite(val_loss):
            raise NonFiniteError(f"validation loss is not finite: {val_loss}")
        if val_loss < self.best * (1.0 - _IMPROVEMENT_RTOL):
            self.best = val_loss
            self.bad_plateau = 0
            self.bad_early = 0
            return ACTION_NONE
        self.bad_plateau += 1
        self.bad_early += 1
        if self.bad_early >= self.early_stop_patience:
            return ACTION_STOP
        if self.bad_plateau >= self.plateau_patience:
            self.bad_plateau = 0
            return ACTION_NONE if lr_at_floor else ACTION_REDUCE_LR
        return ACTION_NONE


def plateau_update(state: PlateauController, val_loss: float,
                   lr_at_floor: bool = False) -> str:
    return state.update(val_loss, lr_at_floor)


def _example_tensors(example) -> tuple[Tensor, Tensor]:
    x = Tensor(signal_to_channels(example.mixture))
    y = Tensor(signal_to_channels(example.soi))
    return x, y


def _mean_val_loss(model, val_set) -> float:
    total = 0.0
    for ex in val_set:
        x, y = _example_tensors(ex)
        total += mse_loss(model.forward(x), y).item()
    return total / len(val_set)


def _batches(n: int, batch_size: int, steps: int, rng: CounterRng):
    """Yield ``steps`` index batches, reshuffling whenever a pass completes."""
    order: list[int] = []
    for _ in range(steps):
        while len(order) < batch_size:
            order.extend(int(i) for i in rng.permutation(n))
        yield order[:batch_size]
        order = order[batch_size:]


def train(model, train_set, val_set, config: TrainConfig,
          history_path=None) -> tuple[str, TrainHistory]:
    """Run the training protocol; returns (best checkpoint path, history).

    The checkpoint on disk always holds the best-validation parameters,
    not the last ones. A non-finite training loss aborts with the last
    good checkpoint attached to the error.
    """
    config.validate()
    if not train_set or not val_set:
        raise InvalidConfigError("train and validation sets must be non-empty")
    rng = CounterRng(config.seed)
    weight_params = [p for p in model.parameters() if p.bounds is None]
    dil_params = [p for p in model.parameters() if p.bounds is not None]
    opt_w = Adam(weight_params, lr=config.lr)
    opt_d = Adam(dil_params, lr=config.dilation_lr if config.dilation_lr is not None
                 else config.lr)
    lr_ratio = opt_d.lr / opt_w.lr
    controller = PlateauController(config.plateau_patience, config.early_stop_patience)
    history = TrainHistory()
    ckpt_path = str(config.checkpoint_path)
    Path(ckpt_path).parent.mkdir(parents=True, exist_ok=True)
    checkpoint_written = False

    hist_fh = open(history_path, "w") if history_path is not None else None
    try:
        for epoch in range(config.max_epochs):
            loss_sum = 0.0
            for batch in _batches(len(train_set), config.batch_size,
                                  config.steps_per_epoch, rng):
                opt_w.zero_grad()
                opt_d.zero_grad()
                batch_loss = 0.0
                for idx in batch:
                    x, y = _example_tensors(train_set[idx])
                    loss = mse_loss(model.forward(x), y)
                    batch_loss += loss.item()
                    backward(smul(loss, 1.0 / len(batch)))
                batch_loss /= len(batch)
                if not math.isfinite(batch_loss):
                    raise TrainAbortError(
                        f"non-finite training loss at epoch {epoch}",
                        last_good_checkpoint=ckpt_path if checkpoint_written else None,
                    )
                opt_w.step()
                if dil_params:
                    opt_d.step()
                loss_sum += batch_loss

            val_loss = _mean_val_loss(model, val_set)
            record = EpochRecord(
                epoch=epoch,
                train_loss=loss_sum / config.steps_per_epoch,
                val_loss=val_loss,
                lr=opt_w.lr,
                dilations=model.dilation_values(),
            )
            history.records.append(record)
            if hist_fh is not None:
                hist_fh.write(json.dumps({
                    "epoch": record.epoch, "train_loss": record.train_loss,
                    "val_loss": record.val_loss, "lr": record.lr,
                    "dilations": record.dilations,
                }, sort_keys=True) + "\n")
                hist_fh.flush()

            if val_loss < history.best_val:
                history.best_val = val_loss
                history.best_epoch = epoch
                model.save(ckpt_path)
                checkpoint_written = True

            action = controller.update(val_loss, lr_at_floor=opt_w.lr <= config.min_lr)
            if action == ACTION_REDUCE_LR:
                opt_w.lr = max(opt_w.lr * config.plateau_factor, config.min_lr)
                opt_d.lr = opt_w.lr * lr_ratio
            elif action == ACTION_STOP:
                history.stop_reason = STOP_EARLY
                break
    finally:
        if hist_fh is not None:
            hist_fh.close()

    if not checkpoint_written:
        model.save(ckpt_path)
    return ckpt_path, history

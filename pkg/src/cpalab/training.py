"""Training loop: mini-batch SGD with Nesterov momentum, plateau-based
learning-rate reduction, early stopping, and best-on-validation checkpointing.

Both callbacks monitor the validation BCE loss and run their patience
counters independently. Defaults give the full-scale regimen; the desk
schedule scales the budget down to CPU-minutes at the same patience ratios.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import (
    Params,
    bce_loss,
    clone_params,
    forward,
    loss_grads_correct,
    sgd_momentum_step,
    zero_velocity,
)


@dataclass(frozen=True)
class TrainingSchedule:
    """Every knob of the regimen; all fields overridable for desk scale."""

    max_epochs: int = 1000
    batch_size: int = 1024
    learning_rate: float = 1e-4
    momentum: float = 0.9
    nesterov: bool = True
    lr_factor: float = 0.5
    lr_patience: int = 20
    lr_min_delta: float = 1e-5
    lr_min: float = 1e-7
    es_patience: int = 100
    es_min_delta: float = 1e-6
    seed: int | None = None


#: budget scaled to minutes on one CPU core, same patience-to-budget ratios
DESK_SCHEDULE = TrainingSchedule(max_epochs=150, es_patience=30, lr_patience=10)


class ReduceLrOnPlateau:
    """Halve the rate after ``patience`` epochs without a ``min_delta``
    improvement of the monitored loss; never drop below ``min_lr``."""

    def __init__(
        self,
        lr: float,
        factor: float = 0.5,
        patience: int = 20,
        min_delta: float = 1e-5,
        min_lr: float = 1e-7,
    ):
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.min_delta = min_delta
        self.min_lr = min_lr
        self.best = math.inf
        self.wait = 0

    def update(self, loss: float) -> float:
        """Call once per epoch; returns the rate for the next epoch."""
        if loss < self.best - self.min_delta:
            self.best = loss
            self.wait = 0
        else:
            self.wait += 1
            if self.wait >= self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.wait = 0
        return self.lr


class EarlyStopping:
    """Signal a stop after ``patience`` epochs without a ``min_delta``
    improvement of the monitored loss."""

    def __init__(self, patience: int = 100, min_delta: float = 1e-6):
        self.patience = patience
        self.min_delta = min_delta
        self.best = math.inf
        self.wait = 0

    def update(self, loss: float) -> bool:
        if loss < self.best - self.min_delta:
            self.best = loss
            self.wait = 0
            return False
        self.wait += 1
        return self.wait >= self.patience


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    lr: float


@dataclass
class TrainingHistory:
    """Per-epoch records; ``best_epoch`` is the epoch of minimum val loss."""

    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="ascii") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc", "lr"])
            for r in self.records:
                writer.writerow(
                    [r.epoch, repr(r.train_loss), repr(r.train_acc), repr(r.val_loss),
                     repr(r.val_acc), repr(r.lr)]
                )

    @classmethod
    def from_csv(cls, path: str | Path) -> "TrainingHistory":
        records = []
        with open(path, newline="", encoding="ascii") as fh:
            for row in csv.DictReader(fh):
                records.append(
                    EpochRecord(
                        epoch=int(row["epoch"]),
                        train_loss=float(row["train_loss"]),
                        train_acc=float(row["train_acc"]),
                        val_loss=float(row["val_loss"]),
                        val_acc=float(row["val_acc"]),
                        lr=float(row["lr"]),
                    )
                )
        if not records:
            return cls([], 0)
        best = min(records, key=lambda r: r.val_loss)
        return cls(records, best.epoch)


def evaluate_loss_acc(
    params: Params, x: np.ndarray, y: np.ndarray, chunk: int = 8192
) -> tuple[float, float]:
    """(mean loss, accuracy) in a fixed evaluation order, float64 accumulation."""
    n = len(y)
    loss_sum = 0.0
    correct = 0
    for at in range(0, n, chunk):
        xb, yb = x[at : at + chunk], y[at : at + chunk]
        p = forward(params, xb)
        loss_sum += bce_loss(yb, p) * len(yb)
        correct += int(((p >= 0.5) == (yb >= 0.5)).sum())
    return loss_sum / n, correct / n


def train_network(
    params: Params,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    schedule: TrainingSchedule,
    rng: np.random.Generator,
) -> tuple[Params, TrainingHistory]:
    """Run the full schedule; returns the best-on-validation parameters.

    Inputs are float32 and already scaled; ``rng`` drives only the per-epoch
    shuffles, so the run is a pure function of (params, data, schedule, rng
    state). Per-epoch train metrics aggregate the mini-batch forward passes
    (each taken before that batch's update); the recorded lr is the one in
    effect during the epoch. Raises RuntimeError if the loss leaves the
    finite range.
    """
    if len(x_train) == 0 or len(x_val) == 0:
        raise ValueError("training and validation sets must be non-empty")
    if schedule.max_epochs < 1 or schedule.batch_size < 1:
        raise ValueError("max_epochs and batch_size must be >= 1")
    n = len(x_train)
    velocity = zero_velocity(params)
    plateau = ReduceLrOnPlateau(
        schedule.learning_rate,
        factor=schedule.lr_factor,
        patience=schedule.lr_patience,
        min_delta=schedule.lr_min_delta,
        min_lr=schedule.lr_min,
    )
    stopper = EarlyStopping(schedule.es_patience, schedule.es_min_delta)
    history = TrainingHistory()
    best_val = math.inf
    best_params = clone_params(params)
    best_epoch = 0
    lr = plateau.lr
    for epoch in range(1, schedule.max_epochs + 1):
        perm = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for at in range(0, n, schedule.batch_size):
            take = perm[at : at + schedule.batch_size]
            batch_loss, batch_correct, grads = loss_grads_correct(
                params, x_train[take], y_train[take]
            )
            sgd_momentum_step(
                params, grads, velocity, lr,
                momentum=schedule.momentum, nesterov=schedule.nesterov,
            )
            loss_sum += batch_loss
            correct += batch_correct
        train_loss, train_acc = loss_sum / n, correct / n
        val_loss, val_acc = evaluate_loss_acc(params, x_val, y_val)
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise RuntimeError(
                f"non-finite loss at epoch {epoch}: train={train_loss} val={val_loss}"
            )
        history.records.append(
            EpochRecord(epoch, train_loss, train_acc, val_loss, val_acc, lr)
        )
        if val_loss < best_val:
            best_val = val_loss
            best_params = clone_params(params)
            best_epoch = epoch
        lr = plateau.update(val_loss)
        if stopper.update(val_loss):
            break
    history.best_epoch = best_epoch
    return best_params, history

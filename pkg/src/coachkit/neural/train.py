"""Training loop: Adam over mean cross-entropy with seeded epoch shuffles.

Keeps the parameter snapshot with the best validation accuracy (earlier
epoch wins ties) and logs per-epoch train loss and validation
accuracy/precision; the log serializes to JSONL, one record per epoch.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from coachkit.corpus import Label
from coachkit.neural.model import NeuralError, TransformerClassifier
from coachkit.textproc import EncodedBatch


class EmptySplit(NeuralError):
    pass


class NonFiniteLoss(NeuralError):
    pass


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 3e-4
    epochs: int = 3
    batch_size: int = 16
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float | None = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.learning_rate < 0:
            raise NeuralError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise NeuralError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise NeuralError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise NeuralError(f"grad_clip must be positive or None, got {self.grad_clip}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_accuracy: float
    val_precision: float


@dataclass
class TrainResult:
    log: list[EpochRecord]
    best_epoch: int
    best_val_accuracy: float


class Adam:
    def __init__(self, params: dict[str, np.ndarray], cfg: TrainingConfig):
        self.cfg = cfg
        self.t = 0
        self.m = {n: np.zeros_like(a) for n, a in params.items()}
        self.v = {n: np.zeros_like(a) for n, a in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        cfg = self.cfg
        self.t += 1
        bc1 = 1.0 - cfg.beta1**self.t
        bc2 = 1.0 - cfg.beta2**self.t
        for name, g in grads.items():
            m = self.m[name]
            v = self.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
            params[name] -= (cfg.learning_rate * update).astype(params[name].dtype)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float | None) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = math.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads.values()))
    if max_norm is not None and total > max_norm and total > 0:
        factor = max_norm / total
        for g in grads.values():
            g *= factor
    return total


def _batches(n: int, batch_size: int, order: np.ndarray):
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def evaluate_batch(
    model: TransformerClassifier, data: EncodedBatch, batch_size: int = 64
) -> tuple[float, float]:
    """(accuracy, precision) with coachable as the positive class."""
    tp = fp = fn = tn = 0
    for start in range(0, len(data), batch_size):
        ids = data.ids[start : start + batch_size]
        mask = data.mask[start : start + batch_size]
        gold = data.labels[start : start + batch_size]
        probs = model.predict_proba(ids, mask)
        pred = (probs[:, Label.COACHABLE] > probs[:, Label.NOT_COACHABLE]).astype(np.int64)
        tp += int(((pred == 1) & (gold == 1)).sum())
        fp += int(((pred == 1) & (gold == 0)).sum())
        fn += int(((pred == 0) & (gold == 1)).sum())
        tn += int(((pred == 0) & (gold == 0)).sum())
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total if total else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    return accuracy, precision


def train(
    model: TransformerClassifier,
    train_data: EncodedBatch,
    val_data: EncodedBatch,
    cfg: TrainingConfig,
) -> TrainResult:
    """Optimize in place; on return the model holds the best-validation
    snapshot.  Deterministic for a fixed (data, config, seed)."""
    cfg.validate()
    if len(train_data) == 0 or train_data.labels is None:
        raise EmptySplit("training split is empty or unlabeled")
    if len(val_data) == 0 or val_data.labels is None:
        raise EmptySplit("validation split is empty or unlabeled")

    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(model.params, cfg)
    log: list[EpochRecord] = []
    best_acc = -1.0
    best_epoch = 0
    best_params: dict[str, np.ndarray] | None = None
    n = len(train_data)

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        for idx in _batches(n, cfg.batch_size, order):
            loss, grads, _ = model.loss_and_grads(
                train_data.ids[idx],
                train_data.mask[idx],
                train_data.labels[idx],
                training=True,
                rng=rng,
            )
            if not math.isfinite(loss):
                raise NonFiniteLoss(
                    f"non-finite loss at epoch {epoch} (lr={cfg.learning_rate}, "
                    f"batch={len(idx)}); aborting"
                )
            loss_sum += loss * len(idx)
            clip_gradients(grads, cfg.grad_clip)
            optimizer.step(model.params, grads)
        val_acc, val_prec = evaluate_batch(model, val_data)
        log.append(
            EpochRecord(
                epoch=epoch,
                train_loss=loss_sum / n,
                val_accuracy=val_acc,
                val_precision=val_prec,
            )
        )
        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_params = model.copy_params()

    if best_params is not None:
        model.set_params(best_params)
    return TrainResult(log=log, best_epoch=best_epoch, best_val_accuracy=best_acc)


def save_train_log(result: TrainResult, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in result.log:
            fh.write(json.dumps(asdict(record), sort_keys=True) + "\n")

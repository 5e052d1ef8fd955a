"""Uniform training loop: metrics, early stopping, best-only checkpointing.

The same loop trains every variant so comparisons stay apples-to-apples;
only the optimizer family follows the model's designation (SGD for the
fine-tuned variants, Adam elsewhere). Losses are sample-weighted averages
of per-batch cross-entropy, accuracy is plain correct-over-total, and the
run halts once validation loss has gone ``patience`` epochs without
improving.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .augment import AugmentationConfig, prepare_eval, random_augment, to_model_input
from .dataset import DatasetManifest, load_image
from .errors import NumericError, ValidationError
from .models import (
    OPTIMIZER_ADAM,
    OPTIMIZER_SGD,
    ModelHandle,
    save_checkpoint,
)


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters held constant across variants in a comparison run.

    ``optimizer_family`` of ``None`` defers to the model handle's designated
    family; setting it explicitly overrides the designation for every run.
    """

    epochs_max: int = 20
    patience: int = 3
    learning_rate: float = 1e-3
    batch_size: int = 32
    momentum: float = 0.9
    min_delta: float = 0.0
    seed: int = 0
    optimizer_family: str | None = None

    def __post_init__(self):
        if self.epochs_max < 1:
            raise ValueError(f"epochs_max must be >= 1, got {self.epochs_max}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.optimizer_family not in (None, OPTIMIZER_SGD, OPTIMIZER_ADAM):
            raise ValueError(f"unknown optimizer_family {self.optimizer_family!r}")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass(frozen=True)
class TrainingHistory:
    epochs: tuple[EpochMetrics, ...]
    best_epoch: int
    stopped_early: bool
    checkpoint_path: Path | None
    wall_clock_seconds: float

    @property
    def best(self) -> EpochMetrics:
        return self.epochs[self.best_epoch - 1]

    @property
    def final(self) -> EpochMetrics:
        return self.epochs[-1]

    def to_csv(self, path: Path | str) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
            for m in self.epochs:
                writer.writerow([m.epoch, m.train_loss, m.train_acc, m.val_loss, m.val_acc])


@dataclass(frozen=True)
class EarlyStopState:
    """Counter of consecutive non-improving validation epochs."""

    patience: int
    min_delta: float = 0.0
    best_val_loss: float = math.inf
    epochs_since_improvement: int = 0


def compute_average_loss(batch_losses: list[tuple[float, int]]) -> float:
    """Sample-weighted mean: sum(loss * batch size) / sum(batch size)."""
    if not batch_losses:
        raise ValueError("batch_losses must be non-empty")
    if any(size <= 0 for _, size in batch_losses):
        raise ValueError("batch sizes must be positive")
    total = sum(size for _, size in batch_losses)
    return sum(loss * size for loss, size in batch_losses) / total


def compute_accuracy(predictions, truths) -> float:
    """Fraction of matching class ids."""
    if len(predictions) != len(truths):
        raise ValueError(
            f"length mismatch: {len(predictions)} predictions vs {len(truths)} truths"
        )
    if len(predictions) == 0:
        raise ValueError("cannot compute accuracy over zero samples")
    matches = sum(1 for p, t in zip(predictions, truths) if p == t)
    return matches / len(predictions)


def early_stop_update(state: EarlyStopState, val_loss: float) -> tuple[EarlyStopState, bool]:
    """Fold one epoch's validation loss into the stop counter.

    Improvement means beating the best loss by more than ``min_delta``;
    otherwise the counter grows, and the stop signal fires once it reaches
    ``patience``.
    """
    if not math.isfinite(val_loss):
        raise NumericError(f"validation loss is not finite: {val_loss}")
    if val_loss < state.best_val_loss - state.min_delta:
        state = replace(state, best_val_loss=val_loss, epochs_since_improvement=0)
    else:
        state = replace(state, epochs_since_improvement=state.epochs_since_improvement + 1)
    return state, state.epochs_since_improvement >= state.patience


def _load_train_batch(entries, cfg: AugmentationConfig | None, size, rng):
    imgs = []
    for entry in entries:
        img = load_image(entry.path)
        if cfg is not None:
            imgs.append(to_model_input(random_augment(img, cfg, rng)))
        else:
            imgs.append(prepare_eval(img, size))
    x = torch.from_numpy(np.stack(imgs)).permute(0, 3, 1, 2)
    y = torch.tensor([entry.label.id for entry in entries], dtype=torch.long)
    return x, y


def _evaluate_epoch(module, manifest, size, batch_size):
    losses, preds, truths = [], [], []
    module.eval()
    with torch.no_grad():
        entries = manifest.entries
        for start in range(0, len(entries), batch_size):
            chunk = entries[start:start + batch_size]
            x, y = _load_train_batch(chunk, None, size, None)
            logits = module(x)
            loss = F.cross_entropy(logits, y)
            losses.append((loss.item(), len(chunk)))
            preds.extend(logits.argmax(dim=1).tolist())
            truths.extend(y.tolist())
    return compute_average_loss(losses), compute_accuracy(preds, truths)


def train(
    handle: ModelHandle,
    train_manifest: DatasetManifest,
    val_manifest: DatasetManifest,
    cfg: TrainingConfig,
    aug_cfg: AugmentationConfig | None = None,
    checkpoint_dir: Path | str | None = None,
    run_id: str = "run",
    on_epoch=None,
) -> TrainingHistory:
    """Train a built model, checkpointing on every validation improvement.

    Augmentation (when configured) applies to training batches only;
    validation always sees resize-plus-rescale inputs. Seeding covers batch
    shuffling, augmentation draws, and dropout, so identical inputs give
    identical histories on a deterministic backend.
    """
    if train_manifest.total == 0 or val_manifest.total == 0:
        raise ValidationError("train and validation manifests must be non-empty")
    size = handle.spec.input_size
    if aug_cfg is not None and tuple(aug_cfg.image_size) != tuple(size):
        raise ValueError(
            f"augmentation image_size {aug_cfg.image_size} != model input_size {size}"
        )

    torch.manual_seed(cfg.seed)
    shuffle_rng = np.random.default_rng(cfg.seed)
    aug_rng = np.random.default_rng(aug_cfg.seed) if aug_cfg is not None else None

    family = cfg.optimizer_family or handle.optimizer_family
    params = handle.trainable_parameters()
    if family == OPTIMIZER_SGD:
        optimizer = torch.optim.SGD(params, lr=cfg.learning_rate, momentum=cfg.momentum)
    else:
        optimizer = torch.optim.Adam(params, lr=cfg.learning_rate)

    stop_state = EarlyStopState(patience=cfg.patience, min_delta=cfg.min_delta)
    history: list[EpochMetrics] = []
    best_val_loss = math.inf
    checkpoint_path: Path | None = None
    stopped_early = False
    started = time.perf_counter()

    entries = list(train_manifest.entries)
    for epoch in range(1, cfg.epochs_max + 1):
        handle.module.train()
        order = shuffle_rng.permutation(len(entries))
        batch_losses, preds, truths = [], [], []
        for bi, start in enumerate(range(0, len(entries), cfg.batch_size)):
            chunk = [entries[i] for i in order[start:start + cfg.batch_size]]
            x, y = _load_train_batch(chunk, aug_cfg, size, aug_rng)
            optimizer.zero_grad()
            logits = handle.module(x)
            loss = F.cross_entropy(logits, y)
            if not torch.isfinite(loss):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch}, batch {bi}: {loss.item()}"
                )
            loss.backward()
            optimizer.step()
            batch_losses.append((loss.item(), len(chunk)))
            preds.extend(logits.argmax(dim=1).tolist())
            truths.extend(y.tolist())

        train_loss = compute_average_loss(batch_losses)
        train_acc = compute_accuracy(preds, truths)
        val_loss, val_acc = _evaluate_epoch(handle.module, val_manifest, size, cfg.batch_size)
        if not math.isfinite(val_loss):
            raise NumericError(f"non-finite validation loss at epoch {epoch}: {val_loss}")
        metrics = EpochMetrics(epoch, train_loss, train_acc, val_loss, val_acc)
        history.append(metrics)
        if on_epoch is not None:
            on_epoch(metrics)

        if val_loss < best_val_loss:
            best_val_loss = val_loss
            if checkpoint_dir is not None:
                name = f"{handle.spec.variant.value}_{run_id}_best.ckpt"
                checkpoint_path = save_checkpoint(handle, Path(checkpoint_dir) / name)

        stop_state, should_stop = early_stop_update(stop_state, val_loss)
        if should_stop:
            stopped_early = epoch < cfg.epochs_max
            break

    best_epoch = min(history, key=lambda m: (m.val_loss, m.epoch)).epoch
    return TrainingHistory(
        epochs=tuple(history),
        best_epoch=best_epoch,
        stopped_early=stopped_early,
        checkpoint_path=checkpoint_path,
        wall_clock_seconds=time.perf_counter() - started,
    )

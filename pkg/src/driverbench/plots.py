"""Static matplotlib figures saved next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .benchmark import RankedResult
from .dataset import ChannelHistogram
from .training import TrainingHistory

_CHANNEL_COLORS = {"R": "tab:red", "G": "tab:green", "B": "tab:blue"}


def plot_channel_histograms(histograms: list[ChannelHistogram], path: Path | str) -> Path:
    """Line plot of the R/G/B intensity distributions over bins 0..255."""
    fig, ax = plt.subplots(figsize=(8, 5))
    for hist in histograms:
        ax.plot(range(256), hist.bins, color=_CHANNEL_COLORS[hist.channel],
                label=f"{hist.channel} channel", linewidth=1.0)
    ax.set_xlabel("Pixel intensity")
    ax.set_ylabel("Count")
    ax.set_title("Pixel intensity distribution across RGB channels")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_training_curves(
    history: TrainingHistory, variant: str, accuracy_path: Path | str, loss_path: Path | str
) -> tuple[Path, Path]:
    """Accuracy-vs-epoch and loss-vs-epoch figures for one training run."""
    epochs = [m.epoch for m in history.epochs]

    fig, ax = plt.subplots(figsize=(7, 5))
    ax.plot(epochs, [m.train_acc for m in history.epochs], label="train accuracy")
    ax.plot(epochs, [m.val_acc for m in history.epochs], label="validation accuracy")
    ax.set_xlabel("Epoch")
    ax.set_ylabel("Accuracy")
    ax.set_title(f"Training and validation accuracy ({variant})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(accuracy_path, dpi=150)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 5))
    ax.plot(epochs, [m.train_loss for m in history.epochs], label="train loss")
    ax.plot(epochs, [m.val_loss for m in history.epochs], label="validation loss")
    ax.axvline(history.best_epoch, color="gray", linestyle=":", linewidth=1,
               label=f"best epoch ({history.best_epoch})")
    ax.set_xlabel("Epoch")
    ax.set_ylabel("Loss")
    ax.set_title(f"Training and validation loss ({variant})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(loss_path, dpi=150)
    plt.close(fig)
    return Path(accuracy_path), Path(loss_path)


def plot_benchmark_bars(ranked: list[RankedResult], path: Path | str) -> Path:
    """Per-model accuracy and elapsed-time bars on twin axes."""
    names = [row.result.variant for row in ranked]
    accs = [row.result.accuracy for row in ranked]
    times = [row.result.elapsed_seconds for row in ranked]
    x = range(len(ranked))

    fig, ax_acc = plt.subplots(figsize=(max(8, 1.1 * len(ranked)), 5))
    ax_time = ax_acc.twinx()
    ax_acc.bar([i - 0.2 for i in x], accs, width=0.4, color="tab:blue", label="accuracy")
    ax_time.bar([i + 0.2 for i in x], times, width=0.4, color="tab:orange", label="elapsed time")
    ax_acc.set_xticks(list(x))
    ax_acc.set_xticklabels(names, rotation=30, ha="right")
    ax_acc.set_ylabel("Accuracy")
    ax_acc.set_ylim(0, 1.05)
    ax_time.set_ylabel("Elapsed time (s)")
    ax_acc.set_title("Overall performance of models")
    handles = ax_acc.get_legend_handles_labels()[0] + ax_time.get_legend_handles_labels()[0]
    labels = ax_acc.get_legend_handles_labels()[1] + ax_time.get_legend_handles_labels()[1]
    ax_acc.legend(handles, labels, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_accuracy_vs_time(ranked: list[RankedResult], path: Path | str) -> Path:
    """Combined accuracy/time scatter with the Pareto front highlighted."""
    fig, ax = plt.subplots(figsize=(8, 5))
    for row in ranked:
        if row.result.failed:
            continue
        marker = "*" if row.pareto else "o"
        size = 160 if row.pareto else 60
        ax.scatter(row.result.elapsed_seconds, row.result.accuracy, marker=marker, s=size,
                   color="tab:green" if row.pareto else "tab:blue", zorder=3)
        ax.annotate(row.result.variant,
                    (row.result.elapsed_seconds, row.result.accuracy),
                    textcoords="offset points", xytext=(5, 4), fontsize=8)
    ax.set_xlabel("Elapsed time (s)")
    ax.set_ylabel("Accuracy")
    ax.set_title("Accuracy and speed of models (stars: Pareto-optimal)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)

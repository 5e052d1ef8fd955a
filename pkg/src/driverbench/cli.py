"""Command-line entry points: analyze, train, benchmark, report.

Each command reads one declarative config file, writes every artifact under
``output_dir/<run-id>/``, and exits with a category-specific code on
failure (2 usage, 3 validation, 4 resource, 5 numeric).
"""

from __future__ import annotations

import csv
import functools
import json
import sys
import time
from pathlib import Path

import click

from . import benchmark as bench
from . import plots, reporting
from .config import effective_config_dict, load_config
from .dataset import (
    CLASS_LABELS,
    SplitSpec,
    compute_channel_histograms,
    histograms_to_csv,
    scan_dataset,
    select_test_subset,
    stratified_split,
)
from .errors import EXIT_USAGE, DriverBenchError, ResourceError
from .models import Variant, build_model, count_parameters
from .training import train as run_training

VARIANT_IDS = [v.value for v in Variant]


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DriverBenchError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)
        except ValueError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_USAGE)

    return wrapper


config_option = click.option(
    "--config", "config_path", required=True, type=click.Path(), help="Run config YAML file."
)
seed_option = click.option(
    "--seed", "seed", type=int, default=None, help="Override the config seed."
)


@click.group()
def main():
    """Train and benchmark driver-distraction classifiers."""


@main.command()
@config_option
@seed_option
@_handle_errors
def analyze(config_path, seed):
    """Summarize the dataset: class counts and RGB intensity histograms."""
    cfg = load_config(config_path, seed_override=seed)
    run_id, run_dir = reporting.new_run_dir(cfg.output_dir, cfg.seed, "analyze")

    manifest = scan_dataset(cfg.dataset_root)
    counts = manifest.counts
    counts_path = run_dir / "class_counts.csv"
    with open(counts_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["label", "description", "count"])
        for lbl in CLASS_LABELS:
            writer.writerow([lbl.folder, lbl.name, counts[lbl.id]])
        writer.writerow(["total", "", manifest.total])

    histograms = compute_channel_histograms(manifest, cfg.analyze_sample_limit)
    histograms_to_csv(histograms, run_dir / "channel_histograms.csv")
    plots.plot_channel_histograms(histograms, run_dir / "intensity_distribution.png")
    manifest.to_csv(run_dir / "manifest.csv")

    reporting.write_run_metadata(run_dir, {
        "run_id": run_id,
        "kind": "analyze",
        "seed": cfg.seed,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "dataset_root": str(cfg.dataset_root),
        "total_images": manifest.total,
        "class_counts": {lbl.folder: counts[lbl.id] for lbl in CLASS_LABELS},
        "sample_limit": cfg.analyze_sample_limit,
        "config": effective_config_dict(cfg),
    })
    for lbl in CLASS_LABELS:
        click.echo(f"{lbl.folder}  {lbl.name:<30} {counts[lbl.id]}")
    click.echo(f"total images: {manifest.total}")
    click.echo(f"artifacts written to {run_dir}")


@main.command()
@config_option
@click.option("--model", "model_id", required=True, type=click.Choice(VARIANT_IDS),
              help="Variant to train.")
@seed_option
@click.option("--no-pretrained", is_flag=True, help="Force random backbone init.")
@_handle_errors
def train(config_path, model_id, seed, no_pretrained):
    """Train one variant with early stopping and best-only checkpointing."""
    cfg = load_config(config_path, seed_override=seed, no_pretrained=no_pretrained)
    variant = Variant(model_id)
    run_id, run_dir = reporting.new_run_dir(cfg.output_dir, cfg.seed, f"train-{variant.value}")

    manifest = scan_dataset(cfg.dataset_root)
    train_manifest, val_manifest = stratified_split(
        manifest, SplitSpec(train_fraction=cfg.train_fraction, seed=cfg.seed)
    )
    click.echo(
        f"dataset: {manifest.total} images -> {train_manifest.total} train / "
        f"{val_manifest.total} val"
    )

    handle = build_model(cfg.model_spec(variant), weights_dir=cfg.weights_dir, seed=cfg.seed)
    trainable, frozen = count_parameters(handle)
    click.echo(f"{variant.value}: {trainable:,} trainable / {frozen:,} frozen parameters "
               f"({handle.optimizer_family} optimizer)")

    aug_cfg = cfg.augmentation if cfg.augmentation_enabled else None
    history = run_training(
        handle,
        train_manifest,
        val_manifest,
        cfg.training,
        aug_cfg=aug_cfg,
        checkpoint_dir=run_dir,
        run_id=run_id,
        on_epoch=lambda m: click.echo(
            f"epoch {m.epoch:>3}/{cfg.training.epochs_max}  "
            f"train loss {m.train_loss:.4f} acc {m.train_acc:.4f}  "
            f"val loss {m.val_loss:.4f} acc {m.val_acc:.4f}"
        ),
    )

    history.to_csv(run_dir / "history.csv")
    plots.plot_training_curves(
        history, variant.value,
        run_dir / "accuracy_vs_epoch.png", run_dir / "loss_vs_epoch.png",
    )
    best, final = history.best, history.final
    reporting.write_run_metadata(run_dir, {
        "run_id": run_id,
        "kind": "train",
        "variant": variant.value,
        "seed": cfg.seed,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "epochs_run": len(history.epochs),
        "best_epoch": history.best_epoch,
        "stopped_early": history.stopped_early,
        "wall_clock_seconds": history.wall_clock_seconds,
        "optimizer_family": handle.optimizer_family,
        "parameters": {"trainable": trainable, "frozen": frozen},
        "best_metrics": {
            "train_loss": best.train_loss, "train_acc": best.train_acc,
            "val_loss": best.val_loss, "val_acc": best.val_acc,
        },
        "final_metrics": {
            "train_loss": final.train_loss, "train_acc": final.train_acc,
            "val_loss": final.val_loss, "val_acc": final.val_acc,
        },
        "checkpoint": str(history.checkpoint_path),
        "config": effective_config_dict(cfg),
    })
    click.echo(
        f"finished in {history.wall_clock_seconds:.1f}s; best epoch {history.best_epoch}"
        + (" (stopped early)" if history.stopped_early else "")
    )
    click.echo(f"artifacts written to {run_dir}")


def _find_checkpoint(output_dir: Path, variant: Variant) -> Path | None:
    hits = sorted(output_dir.glob(f"*/{variant.value}_*_best.ckpt"))
    return hits[-1] if hits else None


@main.command()
@config_option
@seed_option
@_handle_errors
def benchmark(config_path, seed):
    """Evaluate saved checkpoints on a balanced held-out subset."""
    cfg = load_config(config_path, seed_override=seed)
    run_id, run_dir = reporting.new_run_dir(cfg.output_dir, cfg.seed, "benchmark")

    manifest = scan_dataset(cfg.dataset_root)
    _, val_manifest = stratified_split(
        manifest, SplitSpec(train_fraction=cfg.train_fraction, seed=cfg.seed)
    )
    # draw the test subset from the validation side only: no training leakage
    test_manifest = select_test_subset(val_manifest, cfg.benchmark_per_class, cfg.seed)
    test_manifest.to_csv(run_dir / "test_manifest.csv")
    click.echo(f"test subset: {test_manifest.total} images "
               f"({cfg.benchmark_per_class} per class)")

    results = []
    for variant in cfg.models:
        ckpt = _find_checkpoint(cfg.output_dir, variant)
        if ckpt is None:
            results.append(bench.failed_result(
                variant.value, cfg.benchmark_batch_size,
                f"no checkpoint found for {variant.value} under {cfg.output_dir}",
            ))
            click.echo(f"{variant.value}: no checkpoint found", err=True)
            continue
        row = bench.run_benchmark([ckpt], test_manifest, cfg.benchmark_batch_size)[0]
        results.append(row)
        status = "FAILED " + row.error if row.failed else (
            f"accuracy {row.accuracy:.2f}, {row.elapsed_seconds:.3f}s"
        )
        click.echo(f"{variant.value}: {status}")

    ranked = bench.compare_results(results)
    bench.write_benchmark_json(ranked, run_dir / "benchmark.json")
    bench.write_benchmark_csv(ranked, run_dir / "benchmark.csv")
    plots.plot_benchmark_bars(ranked, run_dir / "accuracy_time_bars.png")
    plots.plot_accuracy_vs_time(ranked, run_dir / "accuracy_vs_time.png")

    reporting.write_run_metadata(run_dir, {
        "run_id": run_id,
        "kind": "benchmark",
        "seed": cfg.seed,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "per_class": cfg.benchmark_per_class,
        "batch_size": cfg.benchmark_batch_size,
        "results": bench.ranked_to_json_dict(ranked)["results"],
        "config": effective_config_dict(cfg),
    })
    click.echo(f"artifacts written to {run_dir}")
    if all(r.failed for r in results):
        raise ResourceError("all benchmark rows failed; see the report for details")


@main.command()
@config_option
@_handle_errors
def report(config_path):
    """Aggregate prior runs into one consolidated markdown report."""
    cfg = load_config(config_path)
    run_id, run_dir = reporting.new_run_dir(cfg.output_dir, cfg.seed, "report")
    path = reporting.write_report(cfg.output_dir, run_dir / "report.md")
    reporting.write_run_metadata(run_dir, {
        "run_id": run_id,
        "kind": "report",
        "seed": cfg.seed,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "report": str(path),
        "config": effective_config_dict(cfg),
    })
    click.echo(f"report written to {path}")


if __name__ == "__main__":
    main()

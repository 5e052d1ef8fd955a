"""Run directories, metadata records, and the consolidated report.

Every command writes its artifacts under ``output_dir/<run-id>/`` with a
``run.json`` describing what produced them. The report command walks those
records and renders one markdown document covering training metrics and
benchmark rows with full provenance.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError

RUN_METADATA_NAME = "run.json"


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    kind: str
    directory: Path
    metadata: dict


def new_run_dir(output_dir: Path | str, seed: int, kind: str) -> tuple[str, Path]:
    """Create ``output_dir/<run-id>/`` with a timestamp+seed run id."""
    output_dir = Path(output_dir)
    base = f"{time.strftime('%Y%m%d-%H%M%S')}-s{seed}-{kind}"
    run_id = base
    suffix = 1
    while (output_dir / run_id).exists():
        suffix += 1
        run_id = f"{base}-{suffix}"
    run_dir = output_dir / run_id
    run_dir.mkdir(parents=True)
    return run_id, run_dir


def write_run_metadata(run_dir: Path | str, metadata: dict) -> Path:
    path = Path(run_dir) / RUN_METADATA_NAME
    with open(path, "w") as f:
        json.dump(metadata, f, indent=2, default=str)
    return path


def discover_runs(output_dir: Path | str) -> list[RunRecord]:
    """Collect every run record under ``output_dir``, oldest first."""
    output_dir = Path(output_dir)
    records = []
    if not output_dir.is_dir():
        return records
    for run_dir in sorted(p for p in output_dir.iterdir() if p.is_dir()):
        meta_path = run_dir / RUN_METADATA_NAME
        if not meta_path.is_file():
            continue
        with open(meta_path) as f:
            metadata = json.load(f)
        records.append(
            RunRecord(
                run_id=metadata.get("run_id", run_dir.name),
                kind=metadata.get("kind", "unknown"),
                directory=run_dir,
                metadata=metadata,
            )
        )
    return records


def _fmt(value, digits=4):
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


def _training_rows(records: list[RunRecord]) -> list[str]:
    rows = []
    for rec in records:
        meta = rec.metadata
        best, final = meta.get("best_metrics", {}), meta.get("final_metrics", {})
        rows.append(
            "| {run} | {variant} | {epochs} | {best_epoch} | {stopped} | {ta} | {tl} | {va} | {vl} | {fva} | {fvl} |".format(
                run=rec.run_id,
                variant=meta.get("variant", "?"),
                epochs=meta.get("epochs_run", "?"),
                best_epoch=meta.get("best_epoch", "?"),
                stopped="yes" if meta.get("stopped_early") else "no",
                ta=_fmt(best.get("train_acc", "-")),
                tl=_fmt(best.get("train_loss", "-")),
                va=_fmt(best.get("val_acc", "-")),
                vl=_fmt(best.get("val_loss", "-")),
                fva=_fmt(final.get("val_acc", "-")),
                fvl=_fmt(final.get("val_loss", "-")),
            )
        )
    return rows


def _benchmark_section(rec: RunRecord) -> list[str]:
    lines = [
        f"### Benchmark run `{rec.run_id}` (seed {rec.metadata.get('seed', '?')})",
        "",
        "| rank | variant | accuracy | elapsed (s) | images | pareto | failed |",
        "|---|---|---|---|---|---|---|",
    ]
    for row in rec.metadata.get("results", []):
        lines.append(
            "| {rank} | {variant} | {acc} | {t} | {n} | {p} | {f} |".format(
                rank=row.get("rank", "-"),
                variant=row.get("variant", "?"),
                acc=_fmt(row.get("accuracy", "-"), 2),
                t=_fmt(row.get("elapsed_seconds", "-"), 3),
                n=row.get("images", "-"),
                p="yes" if row.get("pareto") else "no",
                f="yes" if row.get("failed") else "no",
            )
        )
    lines.append("")
    return lines


def write_report(output_dir: Path | str, report_path: Path | str) -> Path:
    """Aggregate all runs under ``output_dir`` into one markdown document."""
    records = discover_runs(Path(output_dir))
    # the report's own (still empty) run directory does not count as an artifact
    records = [r for r in records if r.kind != "report"]
    if not records:
        raise ValidationError(
            f"no run artifacts found under {output_dir}; run analyze/train/benchmark first"
        )

    lines = [
        "# Driver distraction benchmark report",
        "",
        f"Generated: {time.strftime('%Y-%m-%d %H:%M:%S')}",
        f"Aggregated from: {output_dir}",
        "",
        "## Runs",
        "",
        "| run id | kind | seed | variant |",
        "|---|---|---|---|",
    ]
    for rec in records:
        lines.append(
            f"| {rec.run_id} | {rec.kind} | {rec.metadata.get('seed', '?')} "
            f"| {rec.metadata.get('variant', '-')} |"
        )
    lines.append("")

    train_records = [r for r in records if r.kind == "train"]
    if train_records:
        lines += [
            "## Training results",
            "",
            "(best epoch metrics, then final-epoch validation metrics)",
            "",
            "| run id | variant | epochs | best epoch | stopped early | train acc | train loss "
            "| val acc | val loss | final val acc | final val loss |",
            "|---|---|---|---|---|---|---|---|---|---|---|",
            *_training_rows(train_records),
            "",
        ]

    bench_records = [r for r in records if r.kind == "benchmark"]
    if bench_records:
        lines.append("## Benchmark results")
        lines.append("")
        for rec in bench_records:
            lines += _benchmark_section(rec)

    analyze_records = [r for r in records if r.kind == "analyze"]
    if analyze_records:
        lines += ["## Dataset analyses", ""]
        for rec in analyze_records:
            lines.append(
                f"- `{rec.run_id}`: {rec.metadata.get('total_images', '?')} images, "
                f"root `{rec.metadata.get('dataset_root', '?')}`"
            )
        lines.append("")

    lines += [
        "## Configuration echo (most recent run)",
        "",
        "```json",
        json.dumps(records[-1].metadata.get("config", {}), indent=2),
        "```",
        "",
    ]

    report_path = Path(report_path)
    report_path.write_text("\n".join(lines))
    return report_path

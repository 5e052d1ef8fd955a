"""Held-out evaluation: accuracy and wall-clock timing per saved model.

Models are evaluated strictly one after another on a balanced test
manifest. The timed window covers image decoding, preprocessing, and
inference on a monotonic clock; model loading and one warm-up pass are
excluded. A checkpoint that fails to load becomes a flagged row rather
than aborting the run.
"""

from __future__ import annotations

import csv
import json
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from jsonschema import validate as _validate_schema

from .dataset import CLASS_LABELS, DatasetManifest, load_image
from .errors import ValidationError
from .augment import prepare_eval
from .models import Variant, load_checkpoint, predict_batch
from .training import compute_accuracy

TIMING_POLICY = "model load and warm-up excluded; image decode, preprocessing, and inference included"
CLOCK_NAME = "monotonic (time.perf_counter)"


@dataclass(frozen=True)
class TimingRecord:
    t_start: float
    t_end: float
    phase: str  # load | preprocess | inference

    def __post_init__(self):
        if self.t_end < self.t_start:
            raise ValueError("t_end must be >= t_start")
        if self.phase not in ("load", "preprocess", "inference"):
            raise ValueError(f"unknown timing phase {self.phase!r}")

    @property
    def seconds(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class BenchmarkResult:
    variant: str
    accuracy: float
    elapsed_seconds: float
    per_class_correct: dict[int, int]
    images_evaluated: int
    batch_size: int
    failed: bool = False
    error: str = ""
    timings: tuple[TimingRecord, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class RankedResult:
    rank: int
    result: BenchmarkResult
    pareto: bool


def _check_balanced(manifest: DatasetManifest) -> None:
    counts = manifest.counts
    if len(set(counts.values())) != 1 or manifest.total == 0:
        raise ValidationError(f"test manifest must be balanced and non-empty; counts={counts}")


def evaluate_model(
    variant: str,
    predict,
    manifest: DatasetManifest,
    batch_size: int,
    image_size: tuple[int, int],
) -> BenchmarkResult:
    """Time one predictor over the full manifest and tally its accuracy.

    ``predict`` maps a float batch B x H x W x 3 in [0, 1] to per-class
    probability rows; predicted class is the row argmax.
    """
    _check_balanced(manifest)
    entries = manifest.entries
    timings: list[TimingRecord] = []
    preds: list[int] = []
    truths = [e.label.id for e in entries]

    # warm-up pass outside the timed window
    warm = prepare_eval(load_image(entries[0].path), image_size)
    predict(warm[np.newaxis])

    for start in range(0, len(entries), batch_size):
        chunk = entries[start:start + batch_size]
        t0 = time.perf_counter()
        batch = np.stack([prepare_eval(load_image(e.path), image_size) for e in chunk])
        t1 = time.perf_counter()
        probs = predict(batch)
        t2 = time.perf_counter()
        timings.append(TimingRecord(t0, t1, "preprocess"))
        timings.append(TimingRecord(t1, t2, "inference"))
        preds.extend(int(i) for i in np.argmax(probs, axis=1))

    per_class = {lbl.id: 0 for lbl in CLASS_LABELS}
    for p, t in zip(preds, truths):
        if p == t:
            per_class[t] += 1
    return BenchmarkResult(
        variant=variant,
        accuracy=compute_accuracy(preds, truths),
        elapsed_seconds=sum(t.seconds for t in timings),
        per_class_correct=per_class,
        images_evaluated=len(entries),
        batch_size=batch_size,
        timings=tuple(timings),
    )


def failed_result(variant: str, batch_size: int, error: str) -> BenchmarkResult:
    """Flagged placeholder row for a model that could not be evaluated."""
    return BenchmarkResult(
        variant=variant,
        accuracy=0.0,
        elapsed_seconds=0.0,
        per_class_correct={lbl.id: 0 for lbl in CLASS_LABELS},
        images_evaluated=0,
        batch_size=batch_size,
        failed=True,
        error=error,
    )


def _variant_from_filename(path: Path) -> str:
    stem = path.stem
    for value in sorted((v.value for v in Variant), key=len, reverse=True):
        if stem == value or stem.startswith(value + "_"):
            return value
    return stem


def run_benchmark(
    checkpoint_paths: list[Path | str],
    test_manifest: DatasetManifest,
    batch_size: int = 1,
) -> list[BenchmarkResult]:
    """Evaluate each checkpoint sequentially, one result row per file."""
    _check_balanced(test_manifest)
    results: list[BenchmarkResult] = []
    for ckpt in checkpoint_paths:
        ckpt = Path(ckpt)
        t0 = time.perf_counter()
        try:
            handle = load_checkpoint(ckpt)
        except Exception as exc:
            results.append(failed_result(_variant_from_filename(ckpt), batch_size, str(exc)))
            continue
        load_record = TimingRecord(t0, time.perf_counter(), "load")
        result = evaluate_model(
            handle.spec.variant.value,
            lambda batch, h=handle: predict_batch(h, batch),
            test_manifest,
            batch_size,
            handle.spec.input_size,
        )
        results.append(
            BenchmarkResult(
                variant=result.variant,
                accuracy=result.accuracy,
                elapsed_seconds=result.elapsed_seconds,
                per_class_correct=result.per_class_correct,
                images_evaluated=result.images_evaluated,
                batch_size=batch_size,
                timings=(load_record,) + result.timings,
            )
        )
        del handle
    return results


def compare_results(results: list[BenchmarkResult]) -> list[RankedResult]:
    """Rank rows by accuracy (ties: faster first) and flag the Pareto front.

    A row is Pareto-optimal when no other row is at least as accurate and
    strictly faster. Failed rows rank last and are never Pareto-optimal.
    """
    if not results:
        raise ValueError("compare_results needs at least one result")
    ordered = sorted(results, key=lambda r: (r.failed, -r.accuracy, r.elapsed_seconds))
    ranked = []
    for rank, row in enumerate(ordered, start=1):
        pareto = not row.failed and not any(
            other is not row
            and not other.failed
            and other.accuracy >= row.accuracy
            and other.elapsed_seconds < row.elapsed_seconds
            for other in results
        )
        ranked.append(RankedResult(rank=rank, result=row, pareto=pareto))
    return ranked


BENCHMARK_JSON_SCHEMA = {
    "type": "object",
    "required": ["header", "results"],
    "properties": {
        "header": {
            "type": "object",
            "required": ["clock", "timing_policy", "host", "generated_at"],
            "properties": {
                "clock": {"type": "string"},
                "timing_policy": {"type": "string"},
                "host": {"type": "string"},
                "generated_at": {"type": "string"},
            },
        },
        "results": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "variant", "accuracy", "elapsed_seconds", "batch_size",
                    "images", "per_class_correct", "pareto", "failed",
                ],
                "properties": {
                    "variant": {"type": "string"},
                    "accuracy": {"type": "number", "minimum": 0, "maximum": 1},
                    "elapsed_seconds": {"type": "number", "minimum": 0},
                    "batch_size": {"type": "integer", "minimum": 1},
                    "images": {"type": "integer", "minimum": 0},
                    "per_class_correct": {
                        "type": "object",
                        "additionalProperties": {"type": "integer", "minimum": 0},
                    },
                    "pareto": {"type": "boolean"},
                    "failed": {"type": "boolean"},
                    "rank": {"type": "integer", "minimum": 1},
                    "error": {"type": "string"},
                },
            },
        },
    },
}

CSV_COLUMNS = [
    "rank", "variant", "accuracy", "elapsed_seconds", "batch_size", "images",
    *[f"c{lbl.id}_correct" for lbl in CLASS_LABELS], "pareto", "failed", "error",
]


def _header_dict() -> dict:
    return {
        "clock": CLOCK_NAME,
        "timing_policy": TIMING_POLICY,
        "host": f"{platform.platform()} / {platform.processor() or 'unknown cpu'}",
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }


def ranked_to_json_dict(ranked: list[RankedResult]) -> dict:
    doc = {
        "header": _header_dict(),
        "results": [
            {
                "rank": row.rank,
                "variant": row.result.variant,
                "accuracy": row.result.accuracy,
                "elapsed_seconds": row.result.elapsed_seconds,
                "batch_size": row.result.batch_size,
                "images": row.result.images_evaluated,
                "per_class_correct": {f"c{k}": v for k, v in sorted(row.result.per_class_correct.items())},
                "pareto": row.pareto,
                "failed": row.result.failed,
                "error": row.result.error,
            }
            for row in ranked
        ],
    }
    _validate_schema(instance=doc, schema=BENCHMARK_JSON_SCHEMA)
    return doc


def write_benchmark_json(ranked: list[RankedResult], path: Path | str) -> None:
    with open(path, "w") as f:
        json.dump(ranked_to_json_dict(ranked), f, indent=2)


def write_benchmark_csv(ranked: list[RankedResult], path: Path | str) -> None:
    header = _header_dict()
    with open(path, "w", newline="") as f:
        for key, value in header.items():
            f.write(f"# {key}: {value}\n")
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for row in ranked:
            r = row.result
            writer.writerow([
                row.rank, r.variant, r.accuracy, r.elapsed_seconds, r.batch_size,
                r.images_evaluated,
                *[r.per_class_correct.get(lbl.id, 0) for lbl in CLASS_LABELS],
                row.pareto, r.failed, r.error,
            ])

"""Dataset discovery, validation, splitting, and pixel statistics.

The on-disk layout follows the State Farm convention: ten class folders
``c0`` .. ``c9`` under a single root, each holding image files. Everything
downstream works on :class:`DatasetManifest` objects, which are plain lists
of (path, label) pairs and are read-only after construction.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DatasetStructureError, ValidationError

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".jpg", ".jpeg", ".png", ".bmp"}

NUM_CLASSES = 10


@dataclass(frozen=True)
class ClassLabel:
    """One of the ten distraction categories (``c0`` .. ``c9``)."""

    id: int
    name: str

    @property
    def folder(self) -> str:
        return f"c{self.id}"


# State Farm Distracted Driver Detection category names, in label order.
CLASS_LABELS: tuple[ClassLabel, ...] = (
    ClassLabel(0, "Safe driving"),
    ClassLabel(1, "Texting - right"),
    ClassLabel(2, "Talking on the phone - right"),
    ClassLabel(3, "Texting - left"),
    ClassLabel(4, "Talking on the phone - left"),
    ClassLabel(5, "Operating the radio"),
    ClassLabel(6, "Drinking"),
    ClassLabel(7, "Reaching behind"),
    ClassLabel(8, "Hair and makeup"),
    ClassLabel(9, "Talking to passenger"),
)

LABELS_BY_ID = {lbl.id: lbl for lbl in CLASS_LABELS}


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    label: ClassLabel


@dataclass(frozen=True)
class DatasetManifest:
    """Enumeration of labeled image paths plus per-class counts."""

    root: Path
    entries: tuple[ManifestEntry, ...]

    @property
    def counts(self) -> dict[int, int]:
        counts = {lbl.id: 0 for lbl in CLASS_LABELS}
        for entry in self.entries:
            counts[entry.label.id] += 1
        return counts

    @property
    def total(self) -> int:
        return len(self.entries)

    def entries_for(self, label_id: int) -> list[ManifestEntry]:
        return [e for e in self.entries if e.label.id == label_id]

    def to_csv(self, path: Path | str) -> None:
        """Write ``path,label_id`` rows (one per entry)."""
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["path", "label_id"])
            for entry in self.entries:
                writer.writerow([str(entry.path), entry.label.id])

    @classmethod
    def from_csv(cls, path: Path | str, root: Path | str | None = None) -> "DatasetManifest":
        entries = []
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != ["path", "label_id"]:
                raise ValidationError(f"unexpected manifest CSV header in {path}: {header}")
            for row in reader:
                entries.append(ManifestEntry(Path(row[0]), LABELS_BY_ID[int(row[1])]))
        if root is None:
            # class folders live directly under the root
            parents = {e.path.parent.parent for e in entries}
            root = parents.pop() if len(parents) == 1 else Path(".")
        return cls(root=Path(root), entries=tuple(entries))


@dataclass(frozen=True)
class SplitSpec:
    """Parameters of a reproducible train/validation split."""

    train_fraction: float
    seed: int
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")


@dataclass(frozen=True)
class ChannelHistogram:
    """256-bin intensity histogram for one RGB channel."""

    channel: str
    bins: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.channel not in ("R", "G", "B"):
            raise ValueError(f"channel must be one of R, G, B, got {self.channel!r}")
        if self.bins.shape != (256,):
            raise ValueError(f"expected 256 bins, got shape {self.bins.shape}")


def _is_decodable(path: Path) -> bool:
    try:
        with Image.open(path) as img:
            img.verify()
        return True
    except Exception:
        return False


def scan_dataset(root: Path | str) -> DatasetManifest:
    """Enumerate every decodable image under ``<root>/c0 .. c9``.

    Entry order is lexicographic by path so manifests are reproducible
    across filesystems. Undecodable files are skipped with a warning;
    a missing class folder or an empty class aborts the scan.
    """
    root = Path(root)
    for label in CLASS_LABELS:
        if not (root / label.folder).is_dir():
            raise DatasetStructureError(f"missing class folder {label.folder} under {root}")
    entries: list[ManifestEntry] = []
    for label in CLASS_LABELS:
        folder = root / label.folder
        files = sorted(
            p for p in folder.iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
        )
        kept = 0
        for p in files:
            if _is_decodable(p):
                entries.append(ManifestEntry(p, label))
                kept += 1
            else:
                logger.warning("skipping undecodable image file: %s", p)
        if kept == 0:
            raise ValidationError(f"class folder {label.folder} contains no decodable images")
    return DatasetManifest(root=root, entries=tuple(entries))


def _sorted_manifest(root: Path, entries: list[ManifestEntry]) -> DatasetManifest:
    return DatasetManifest(root=root, entries=tuple(sorted(entries, key=lambda e: str(e.path))))


def stratified_split(
    manifest: DatasetManifest, spec: SplitSpec
) -> tuple[DatasetManifest, DatasetManifest]:
    """Split a manifest into disjoint train/validation manifests.

    The total train size is ``round(total * train_fraction)``; per-class
    sizes are apportioned largest-remainder so every class stays within
    one image of its exact fraction. Identical seeds give identical
    splits. Requires at least two images per class.
    """
    if not spec.stratified:
        return _unstratified_split(manifest, spec)

    rng = np.random.default_rng(spec.seed)
    per_class = {lbl.id: manifest.entries_for(lbl.id) for lbl in CLASS_LABELS}
    for label_id, items in per_class.items():
        if len(items) < 2:
            raise ValidationError(
                f"class c{label_id} has {len(items)} image(s); need at least 2 to split"
            )

    total_train = round(manifest.total * spec.train_fraction)
    base = {cid: math.floor(len(items) * spec.train_fraction) for cid, items in per_class.items()}
    remainder = {
        cid: len(items) * spec.train_fraction - base[cid] for cid, items in per_class.items()
    }
    extra = total_train - sum(base.values())

    # seeded shuffle then stable sort: remainder ties break randomly but
    # reproducibly under the seed
    order = [lbl.id for lbl in CLASS_LABELS]
    rng.shuffle(order)
    order.sort(key=lambda cid: remainder[cid], reverse=True)
    take = dict(base)
    for cid in order[:extra]:
        take[cid] += 1

    train_entries: list[ManifestEntry] = []
    val_entries: list[ManifestEntry] = []
    for label in CLASS_LABELS:
        items = list(per_class[label.id])
        rng.shuffle(items)
        n = take[label.id]
        train_entries.extend(items[:n])
        val_entries.extend(items[n:])

    return (
        _sorted_manifest(manifest.root, train_entries),
        _sorted_manifest(manifest.root, val_entries),
    )


def _unstratified_split(
    manifest: DatasetManifest, spec: SplitSpec
) -> tuple[DatasetManifest, DatasetManifest]:
    for label in CLASS_LABELS:
        if len(manifest.entries_for(label.id)) < 2:
            raise ValidationError(f"class {label.folder} has fewer than 2 images")
    rng = np.random.default_rng(spec.seed)
    items = list(manifest.entries)
    rng.shuffle(items)
    n = round(len(items) * spec.train_fraction)
    return (
        _sorted_manifest(manifest.root, items[:n]),
        _sorted_manifest(manifest.root, items[n:]),
    )


def load_image(path: Path | str) -> np.ndarray:
    """Decode an image file to an RGB uint8 array of shape H x W x 3."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def compute_channel_histograms(
    manifest: DatasetManifest, sample_limit: int | None = None
) -> list[ChannelHistogram]:
    """Accumulate 256-bin R/G/B intensity histograms over the manifest.

    With ``sample_limit`` set, only the first ``sample_limit`` entries in
    manifest order are analyzed. Per-image partial counts are summed, so
    the accumulation order never changes the result.
    """
    if manifest.total == 0:
        raise ValidationError("cannot compute histograms over an empty manifest")
    entries = manifest.entries if sample_limit is None else manifest.entries[:sample_limit]
    bins = np.zeros((3, 256), dtype=np.int64)
    for entry in entries:
        img = load_image(entry.path)
        for ch in range(3):
            bins[ch] += np.bincount(img[..., ch].ravel(), minlength=256)
    return [ChannelHistogram(name, bins[ch]) for ch, name in enumerate("RGB")]


def histograms_to_csv(histograms: list[ChannelHistogram], path: Path | str) -> None:
    """Write ``channel,bin,count`` rows for all 3 x 256 bins."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["channel", "bin", "count"])
        for hist in histograms:
            for b, count in enumerate(hist.bins):
                writer.writerow([hist.channel, b, int(count)])


def select_test_subset(
    manifest: DatasetManifest, per_class: int, seed: int
) -> DatasetManifest:
    """Draw ``per_class`` images per class without replacement.

    Reproduces the held-out evaluation protocol: a balanced subset drawn
    reproducibly under ``seed``. Raises when any class is short.
    """
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    rng = np.random.default_rng(seed)
    selected: list[ManifestEntry] = []
    for label in CLASS_LABELS:
        items = manifest.entries_for(label.id)
        if len(items) < per_class:
            raise ValidationError(
                f"class {label.folder} has only {len(items)} image(s); need {per_class}"
            )
        picks = rng.choice(len(items), size=per_class, replace=False)
        selected.extend(items[i] for i in picks)
    return _sorted_manifest(manifest.root, selected)

"""Shared fixtures: synthetic class-foldered image datasets.

Synthetic images encode their class in their mean intensity (class k sits
near 10 + 24k), so a trivial intensity decoder can act as a ground-truth
predictor and small models can memorize the set quickly.
"""

from pathlib import Path

import numpy as np
import pytest
from PIL import Image

CLASS_BASE = 10
CLASS_STEP = 24


def class_intensity(label_id: int) -> int:
    return CLASS_BASE + CLASS_STEP * label_id


def intensity_to_class(mean_intensity: float) -> int:
    return int(round((mean_intensity - CLASS_BASE) / CLASS_STEP))


def build_synthetic_dataset(
    root: Path, per_class: int, size=(64, 64), seed: int = 0, noise: int = 5
) -> Path:
    """Write ``per_class`` PNGs into each of c0..c9 under ``root``."""
    rng = np.random.default_rng(seed)
    h, w = size
    for k in range(10):
        folder = root / f"c{k}"
        folder.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            base = np.full((h, w, 3), class_intensity(k), dtype=np.int16)
            jitter = rng.integers(-noise, noise + 1, size=(h, w, 3), dtype=np.int16)
            img = np.clip(base + jitter, 0, 255).astype(np.uint8)
            Image.fromarray(img).save(folder / f"img_{i:03d}.png")
    return root


@pytest.fixture
def tiny_dataset(tmp_path):
    """2 images per class, 20 total."""
    return build_synthetic_dataset(tmp_path / "data", per_class=2, size=(48, 48), seed=1)


@pytest.fixture(scope="session")
def bench_dataset(tmp_path_factory):
    """10 images per class, 100 total; shared read-only across tests."""
    root = tmp_path_factory.mktemp("bench") / "data"
    return build_synthetic_dataset(root, per_class=10, size=(64, 64), seed=2)


@pytest.fixture(scope="session")
def overfit_dataset(tmp_path_factory):
    """4 images per class, 40 total; memorizable by a small CNN."""
    root = tmp_path_factory.mktemp("overfit") / "data"
    return build_synthetic_dataset(root, per_class=4, size=(64, 64), seed=3)

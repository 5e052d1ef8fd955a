"""Image preprocessing and seeded augmentation.

Images travel as numpy arrays: uint8 H x W x 3 in storage form, float32 in
[0, 1] as model input. Augmentation draws all of its random parameters from
an explicit numpy ``Generator`` in a fixed order, so a given (image, config,
seed) triple always produces a bit-identical output, and degenerate ranges
skip their transform entirely (pixel-exact passthrough).
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np
import torch
import torchvision.transforms.functional as TF
from torchvision.transforms import InterpolationMode


@dataclass(frozen=True)
class AugmentationConfig:
    """Ranges for the stochastic training-time transforms.

    Defaults keep the distortions slight: mild brightness/contrast jitter,
    +/-10 degree rotations, small translations/shears/scalings, and a 50%
    horizontal flip. Note that flips mirror left/right-handed poses; set
    ``hflip_prob=0`` when that distinction must survive augmentation.
    """

    brightness_range: tuple[float, float] = (0.8, 1.2)
    contrast_range: tuple[float, float] = (0.8, 1.2)
    rotation_max_deg: float = 10.0
    hflip_prob: float = 0.5
    translate_frac: float = 0.05
    shear_max_deg: float = 5.0
    scale_range: tuple[float, float] = (0.95, 1.05)
    seed: int = 0
    image_size: tuple[int, int] = (224, 224)

    def __post_init__(self):
        for name in ("brightness_range", "contrast_range", "scale_range"):
            low, high = getattr(self, name)
            if low > high:
                raise ValueError(f"{name} low {low} exceeds high {high}")
        if not 0.0 <= self.hflip_prob <= 1.0:
            raise ValueError(f"hflip_prob must be in [0, 1], got {self.hflip_prob}")
        if self.rotation_max_deg < 0 or self.shear_max_deg < 0 or self.translate_frac < 0:
            raise ValueError("rotation, shear, and translation extents must be non-negative")
        h, w = self.image_size
        if h <= 0 or w <= 0:
            raise ValueError(f"image_size must be positive, got {self.image_size}")

    @classmethod
    def identity(cls, image_size: tuple[int, int] = (224, 224), seed: int = 0) -> "AugmentationConfig":
        """Config whose every range is degenerate: resize-only behavior."""
        return cls(
            brightness_range=(1.0, 1.0),
            contrast_range=(1.0, 1.0),
            rotation_max_deg=0.0,
            hflip_prob=0.0,
            translate_frac=0.0,
            shear_max_deg=0.0,
            scale_range=(1.0, 1.0),
            seed=seed,
            image_size=image_size,
        )


def _check_uint8(img: np.ndarray) -> None:
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected uint8 H x W x 3 image, got {img.dtype} {img.shape}")


def enhance_brightness(img: np.ndarray, factor: float) -> np.ndarray:
    """Scale the HSV value channel by ``factor``, clipping at white.

    The hue/saturation channels are untouched, so saturated colors stay
    saturated instead of washing out the way a plain RGB multiply would.
    """
    _check_uint8(img)
    if factor <= 0:
        raise ValueError(f"brightness factor must be positive, got {factor}")
    if factor == 1.0:
        return img.copy()
    hsv = cv2.cvtColor(img.astype(np.float32) / 255.0, cv2.COLOR_RGB2HSV)
    hsv[..., 2] = np.clip(hsv[..., 2] * factor, 0.0, 1.0)
    rgb = cv2.cvtColor(hsv, cv2.COLOR_HSV2RGB)
    return np.rint(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)


def change_contrast(img: np.ndarray, factor: float) -> np.ndarray:
    """Scale distances from mid-gray 128: out = (in - 128) * factor + 128."""
    _check_uint8(img)
    if factor <= 0:
        raise ValueError(f"contrast factor must be positive, got {factor}")
    if factor == 1.0:
        return img.copy()
    out = (img.astype(np.float64) - 128.0) * factor + 128.0
    return np.rint(np.clip(out, 0.0, 255.0)).astype(np.uint8)


def resize(img: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Bilinear resize to (height, width)."""
    _check_uint8(img)
    h, w = size
    if img.shape[:2] == (h, w):
        return img.copy()
    return cv2.resize(img, (w, h), interpolation=cv2.INTER_LINEAR)


def to_model_input(img: np.ndarray) -> np.ndarray:
    """Map a uint8 image into the [0, 1] float32 model-input form."""
    _check_uint8(img)
    return img.astype(np.float32) / 255.0


def random_augment(
    img: np.ndarray, cfg: AugmentationConfig, rng: np.random.Generator
) -> np.ndarray:
    """Apply the augmentation pipeline in its fixed order.

    Stages: resize -> horizontal flip -> rotation -> affine (translate,
    shear, scale) -> brightness -> contrast. Every random parameter is
    drawn from ``rng`` whether or not its range is degenerate, so the
    stream position after a call does not depend on the config.
    """
    _check_uint8(img)
    flip_draw = rng.random()
    angle = rng.uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg)
    h, w = cfg.image_size
    tx = rng.uniform(-cfg.translate_frac, cfg.translate_frac) * w
    ty = rng.uniform(-cfg.translate_frac, cfg.translate_frac) * h
    shear = rng.uniform(-cfg.shear_max_deg, cfg.shear_max_deg)
    scale = rng.uniform(*cfg.scale_range)
    brightness = rng.uniform(*cfg.brightness_range)
    contrast = rng.uniform(*cfg.contrast_range)

    out = resize(img, cfg.image_size)
    if flip_draw < cfg.hflip_prob:
        out = np.ascontiguousarray(out[:, ::-1])

    rotate = angle != 0.0
    affine = tx != 0.0 or ty != 0.0 or shear != 0.0 or scale != 1.0
    if rotate or affine:
        t = torch.from_numpy(out.transpose(2, 0, 1).copy()).float()
        if rotate:
            t = TF.rotate(t, angle, interpolation=InterpolationMode.BILINEAR, fill=[0.0])
        if affine:
            t = TF.affine(
                t,
                angle=0.0,
                translate=[tx, ty],
                scale=scale,
                shear=[shear],
                interpolation=InterpolationMode.BILINEAR,
                fill=[0.0],
            )
        out = np.rint(t.clamp(0.0, 255.0).numpy()).astype(np.uint8).transpose(1, 2, 0)

    if brightness != 1.0:
        out = enhance_brightness(out, brightness)
    if contrast != 1.0:
        out = change_contrast(out, contrast)
    return out


def prepare_eval(img: np.ndarray, image_size: tuple[int, int]) -> np.ndarray:
    """Validation/test preprocessing: resize plus [0, 1] scaling, nothing else."""
    return to_model_input(resize(img, image_size))

"""Declarative run configuration: one YAML file drives every command.

The document is schema-validated up front (all violations reported at
once, before any side effect) and then materialized into the dataclasses
the library consumes. Defaults are filled in here so the effective
configuration echoed into run metadata is always complete.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml
from jsonschema import Draft202012Validator

from .augment import AugmentationConfig
from .errors import ValidationError
from .models import ModelSpec, Variant
from .training import TrainingConfig

WEIGHTS_DIR_ENV = "DRIVERBENCH_WEIGHTS_DIR"

_RANGE = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_SIZE = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["dataset_root", "output_dir"],
    "additionalProperties": False,
    "properties": {
        "dataset_root": {"type": "string"},
        "output_dir": {"type": "string"},
        "weights_dir": {"type": ["string", "null"]},
        "seed": {"type": "integer"},
        "pretrained": {"type": "boolean"},
        "models": {
            "type": "array",
            "items": {"type": "string", "enum": [v.value for v in Variant]},
            "minItems": 1,
        },
        "image_size": _SIZE,
        "split": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "train_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "training": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epochs_max": {"type": "integer", "minimum": 1},
                "patience": {"type": "integer", "minimum": 1},
                "learning_rate": {"type": "number", "exclusiveMinimum": 0},
                "batch_size": {"type": "integer", "minimum": 1},
                "momentum": {"type": "number", "minimum": 0},
                "min_delta": {"type": "number", "minimum": 0},
                "optimizer_family": {"type": ["string", "null"], "enum": ["sgd", "adam", None]},
            },
        },
        "augmentation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "brightness_range": _RANGE,
                "contrast_range": _RANGE,
                "rotation_max_deg": {"type": "number", "minimum": 0},
                "hflip_prob": {"type": "number", "minimum": 0, "maximum": 1},
                "translate_frac": {"type": "number", "minimum": 0},
                "shear_max_deg": {"type": "number", "minimum": 0},
                "scale_range": _RANGE,
            },
        },
        "hybrid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "encoder_layers": {"type": "integer", "minimum": 1},
                "attention_heads": {"type": "integer", "minimum": 1},
                "feedforward_dim": {"type": "integer", "minimum": 1},
                "freeze_backbone": {"type": "boolean"},
            },
        },
        "benchmark": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "per_class": {"type": "integer", "minimum": 1},
                "batch_size": {"type": "integer", "minimum": 1},
            },
        },
        "analyze": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sample_limit": {"type": ["integer", "null"], "minimum": 1},
            },
        },
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration for one command invocation."""

    dataset_root: Path
    output_dir: Path
    weights_dir: Path | None
    seed: int
    pretrained: bool
    models: tuple[Variant, ...]
    image_size: tuple[int, int]
    train_fraction: float
    training: TrainingConfig
    augmentation: AugmentationConfig
    augmentation_enabled: bool
    hybrid: dict = field(default_factory=dict)
    benchmark_per_class: int = 10
    benchmark_batch_size: int = 1
    analyze_sample_limit: int | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def model_spec(self, variant: Variant) -> ModelSpec:
        return ModelSpec(
            variant=variant,
            pretrained_backbone=self.pretrained,
            input_size=self.image_size,
            hybrid_encoder_layers=self.hybrid.get("encoder_layers", 2),
            hybrid_attention_heads=self.hybrid.get("attention_heads", 8),
            hybrid_feedforward_dim=self.hybrid.get("feedforward_dim", 1024),
            hybrid_freeze_backbone=self.hybrid.get("freeze_backbone", False),
        )


def validate_config_dict(doc: dict) -> None:
    """Raise one ValidationError listing every schema violation."""
    validator = Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [
            f"  {'/'.join(str(p) for p in err.absolute_path) or '<root>'}: {err.message}"
            for err in errors
        ]
        raise ValidationError("invalid configuration:\n" + "\n".join(lines))


def load_config(
    path: Path | str,
    seed_override: int | None = None,
    no_pretrained: bool = False,
) -> RunConfig:
    """Parse, validate, and resolve a YAML config file."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    with open(path) as f:
        doc = yaml.safe_load(f)
    if not isinstance(doc, dict):
        raise ValidationError(f"config file {path} must contain a mapping")
    validate_config_dict(doc)

    seed = seed_override if seed_override is not None else doc.get("seed", 0)
    pretrained = False if no_pretrained else doc.get("pretrained", False)
    image_size = tuple(doc.get("image_size", [224, 224]))

    training_doc = doc.get("training", {})
    training = TrainingConfig(
        epochs_max=training_doc.get("epochs_max", 20),
        patience=training_doc.get("patience", 3),
        learning_rate=training_doc.get("learning_rate", 1e-3),
        batch_size=training_doc.get("batch_size", 32),
        momentum=training_doc.get("momentum", 0.9),
        min_delta=training_doc.get("min_delta", 0.0),
        seed=seed,
        optimizer_family=training_doc.get("optimizer_family"),
    )

    aug_doc = doc.get("augmentation", {})
    augmentation = AugmentationConfig(
        brightness_range=tuple(aug_doc.get("brightness_range", [0.8, 1.2])),
        contrast_range=tuple(aug_doc.get("contrast_range", [0.8, 1.2])),
        rotation_max_deg=aug_doc.get("rotation_max_deg", 10.0),
        hflip_prob=aug_doc.get("hflip_prob", 0.5),
        translate_frac=aug_doc.get("translate_frac", 0.05),
        shear_max_deg=aug_doc.get("shear_max_deg", 5.0),
        scale_range=tuple(aug_doc.get("scale_range", [0.95, 1.05])),
        seed=seed,
        image_size=image_size,
    )

    weights_dir = os.environ.get(WEIGHTS_DIR_ENV) or doc.get("weights_dir")
    models = tuple(Variant(v) for v in doc.get("models", [v.value for v in Variant]))
    benchmark_doc = doc.get("benchmark", {})

    return RunConfig(
        dataset_root=Path(doc["dataset_root"]),
        output_dir=Path(doc["output_dir"]),
        weights_dir=Path(weights_dir) if weights_dir else None,
        seed=seed,
        pretrained=pretrained,
        models=models,
        image_size=image_size,
        train_fraction=doc.get("split", {}).get("train_fraction", 0.8),
        training=training,
        augmentation=augmentation,
        augmentation_enabled=aug_doc.get("enabled", True),
        hybrid=doc.get("hybrid", {}),
        benchmark_per_class=benchmark_doc.get("per_class", 10),
        benchmark_batch_size=benchmark_doc.get("batch_size", 1),
        analyze_sample_limit=doc.get("analyze", {}).get("sample_limit"),
        raw=doc,
    )


def effective_config_dict(cfg: RunConfig) -> dict:
    """The fully resolved configuration, suitable for run metadata echo."""
    return {
        "dataset_root": str(cfg.dataset_root),
        "output_dir": str(cfg.output_dir),
        "weights_dir": str(cfg.weights_dir) if cfg.weights_dir else None,
        "seed": cfg.seed,
        "pretrained": cfg.pretrained,
        "models": [v.value for v in cfg.models],
        "image_size": list(cfg.image_size),
        "split": {"train_fraction": cfg.train_fraction},
        "training": {
            "epochs_max": cfg.training.epochs_max,
            "patience": cfg.training.patience,
            "learning_rate": cfg.training.learning_rate,
            "batch_size": cfg.training.batch_size,
            "momentum": cfg.training.momentum,
            "min_delta": cfg.training.min_delta,
            "optimizer_family": cfg.training.optimizer_family,
        },
        "augmentation": {
            "enabled": cfg.augmentation_enabled,
            "brightness_range": list(cfg.augmentation.brightness_range),
            "contrast_range": list(cfg.augmentation.contrast_range),
            "rotation_max_deg": cfg.augmentation.rotation_max_deg,
            "hflip_prob": cfg.augmentation.hflip_prob,
            "translate_frac": cfg.augmentation.translate_frac,
            "shear_max_deg": cfg.augmentation.shear_max_deg,
            "scale_range": list(cfg.augmentation.scale_range),
        },
        "hybrid": dict(cfg.hybrid),
        "benchmark": {
            "per_class": cfg.benchmark_per_class,
            "batch_size": cfg.benchmark_batch_size,
        },
        "analyze": {"sample_limit": cfg.analyze_sample_limit},
    }

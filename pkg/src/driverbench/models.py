"""The ten classifier variants behind one uniform handle.

Every variant maps a float batch of RGB images to 10-class logits. Backbones
come from torchvision (VGG16/VGG19 conv bases, ResNet50 trunk) and can start
from locally stored pretrained weights or random init; heads and freeze
policies are defined here. Frozen parameters simply have ``requires_grad``
cleared, so optimizers built over trainable parameters never touch them.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
from torchvision import models as tv_models

from .errors import CheckpointFormatError, ResourceError


class Variant(str, Enum):
    SIMPLE_CNN = "simple_cnn"
    VGG16_DEEP = "vgg16_deep"
    VGG16_SHALLOW = "vgg16_shallow"
    VGG16_FT_B = "vgg16_ft_b"
    VGG16_FT_NB = "vgg16_ft_nb"
    VGG19_DEEP = "vgg19_deep"
    VGG19_SHALLOW = "vgg19_shallow"
    VGG19_FT_B = "vgg19_ft_b"
    VGG19_FT_NB = "vgg19_ft_nb"
    HYBRID_CNN_TRANSFORMER = "hybrid_cnn_transformer"


ALL_VARIANTS: tuple[Variant, ...] = tuple(Variant)

VGG_DEEP_VARIANTS = {Variant.VGG16_DEEP, Variant.VGG19_DEEP}
VGG_SHALLOW_VARIANTS = {Variant.VGG16_SHALLOW, Variant.VGG19_SHALLOW}
VGG_FINETUNED_VARIANTS = {
    Variant.VGG16_FT_B,
    Variant.VGG16_FT_NB,
    Variant.VGG19_FT_B,
    Variant.VGG19_FT_NB,
}

# Fine-tuned variants train with SGD (plus momentum); everything else
# defaults to the adaptive-moment family.
OPTIMIZER_SGD = "sgd"
OPTIMIZER_ADAM = "adam"

# "Batch-wise" fine-tuning trains only the last few weighted backbone
# layers; this many convolutions stay trainable, counted from the end.
FT_TRAINABLE_TAIL = 4


@dataclass(frozen=True)
class ModelSpec:
    """Architecture selection plus the knobs that shape it."""

    variant: Variant
    num_classes: int = 10
    pretrained_backbone: bool = False
    input_size: tuple[int, int] = (224, 224)
    hybrid_encoder_layers: int = 2
    hybrid_attention_heads: int = 8
    hybrid_feedforward_dim: int = 1024
    hybrid_freeze_backbone: bool = False

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        h, w = self.input_size
        if h <= 0 or w <= 0:
            raise ValueError(f"input_size must be positive, got {self.input_size}")

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "num_classes": self.num_classes,
            "pretrained_backbone": self.pretrained_backbone,
            "input_size": list(self.input_size),
            "hybrid_encoder_layers": self.hybrid_encoder_layers,
            "hybrid_attention_heads": self.hybrid_attention_heads,
            "hybrid_feedforward_dim": self.hybrid_feedforward_dim,
            "hybrid_freeze_backbone": self.hybrid_freeze_backbone,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        data = dict(data)
        data["variant"] = Variant(data["variant"])
        data["input_size"] = tuple(data["input_size"])
        return cls(**data)


@dataclass
class ModelHandle:
    """A built model plus its spec and designated optimizer family."""

    spec: ModelSpec
    module: nn.Module
    optimizer_family: str

    def trainable_parameters(self):
        return [p for p in self.module.parameters() if p.requires_grad]

    def frozen_parameter_names(self) -> set[str]:
        return {n for n, p in self.module.named_parameters() if not p.requires_grad}


def count_parameters(handle: ModelHandle) -> tuple[int, int]:
    """Return (trainable, frozen) parameter totals."""
    trainable = sum(p.numel() for p in handle.module.parameters() if p.requires_grad)
    frozen = sum(p.numel() for p in handle.module.parameters() if not p.requires_grad)
    return trainable, frozen


def _pooled_hw(size: tuple[int, int], stride: int) -> tuple[int, int]:
    h, w = size[0] // stride, size[1] // stride
    if h < 1 or w < 1:
        raise ValueError(f"input_size {size} is too small for a stride-{stride} backbone")
    return h, w


class SimpleCNN(nn.Module):
    """Three conv/pool stages (32, 64, 128 filters) into a 512-unit head."""

    def __init__(self, num_classes: int, input_size: tuple[int, int]):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 32, kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(kernel_size=2, stride=2),
            nn.Conv2d(32, 64, kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(kernel_size=2, stride=2),
            nn.Conv2d(64, 128, kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(kernel_size=2, stride=2),
        )
        h, w = _pooled_hw(input_size, 8)
        self.classifier = nn.Sequential(
            nn.Flatten(),
            nn.Linear(128 * h * w, 512),
            nn.ReLU(inplace=True),
            nn.Linear(512, num_classes),
        )

    def forward(self, x):
        return self.classifier(self.features(x))


class VggDenseClassifier(nn.Module):
    """VGG conv base with a flatten -> dense -> dropout -> dense head."""

    def __init__(self, features: nn.Module, hidden: int, num_classes: int,
                 input_size: tuple[int, int]):
        super().__init__()
        self.features = features
        h, w = _pooled_hw(input_size, 32)
        self.classifier = nn.Sequential(
            nn.Flatten(),
            nn.Linear(512 * h * w, hidden),
            nn.ReLU(inplace=True),
            nn.Dropout(0.5),
            nn.Linear(hidden, num_classes),
        )

    def forward(self, x):
        return self.classifier(self.features(x))


class VggGapClassifier(nn.Module):
    """VGG conv base pooled to one value per channel, then a linear head."""

    def __init__(self, features: nn.Module, num_classes: int):
        super().__init__()
        self.features = features
        self.head = nn.Linear(512, num_classes)

    def forward(self, x):
        x = self.features(x)
        x = x.mean(dim=(2, 3))
        return self.head(x)


class HybridClassifier(nn.Module):
    """ResNet50 trunk feeding spatial tokens through a transformer encoder.

    The trunk's final pooling/fc are dropped so its 2048-channel feature map
    survives; each spatial position is projected to 512 dims and treated as
    one token (49 of them at 224 input). No positional encoding is added, so
    the encoder-plus-mean-pool stack is token-permutation invariant.
    """

    def __init__(self, backbone: nn.Module, num_classes: int, encoder_layers: int,
                 attention_heads: int, feedforward_dim: int, token_dim: int = 512):
        super().__init__()
        self.backbone = backbone
        self.project = nn.Linear(2048, token_dim)
        layer = nn.TransformerEncoderLayer(
            d_model=token_dim,
            nhead=attention_heads,
            dim_feedforward=feedforward_dim,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=encoder_layers)
        self.head = nn.Linear(token_dim, num_classes)

    def encode_tokens(self, x: torch.Tensor) -> torch.Tensor:
        feat = self.backbone(x)                   # B x 2048 x h x w
        tokens = feat.flatten(2).transpose(1, 2)  # B x (h*w) x 2048
        return self.project(tokens)

    def classify_tokens(self, tokens: torch.Tensor) -> torch.Tensor:
        return self.head(self.encoder(tokens).mean(dim=1))

    def forward(self, x):
        return self.classify_tokens(self.encode_tokens(x))


def _locate_weights(arch: str, weights_dir: Path | str | None) -> Path:
    hint = (
        f"download the torchvision '{arch}' ImageNet weights (.pth) into the "
        f"weights directory, or build with pretrained_backbone=False"
    )
    if weights_dir is None:
        raise ResourceError(f"pretrained backbone requested but no weights_dir configured; {hint}")
    candidates = sorted(Path(weights_dir).glob(f"{arch}*.pth"))
    if not candidates:
        raise ResourceError(f"no '{arch}*.pth' weight file under {weights_dir}; {hint}")
    return candidates[0]


def _load_pretrained(model: nn.Module, arch: str, weights_dir: Path | str | None) -> None:
    path = _locate_weights(arch, weights_dir)
    try:
        state = torch.load(path, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    except ResourceError:
        raise
    except Exception as exc:
        raise ResourceError(f"failed to load pretrained weights from {path}: {exc}") from exc


def _vgg_features(variant: Variant, pretrained: bool, weights_dir) -> nn.Sequential:
    arch = "vgg16" if variant.value.startswith("vgg16") else "vgg19"
    ctor = tv_models.vgg16 if arch == "vgg16" else tv_models.vgg19
    model = ctor(weights=None)
    if pretrained:
        _load_pretrained(model, arch, weights_dir)
    return model.features


def _freeze(parameters) -> None:
    for p in parameters:
        p.requires_grad = False


def build_simple_cnn(spec: ModelSpec) -> ModelHandle:
    """All-trainable baseline CNN."""
    if spec.variant is not Variant.SIMPLE_CNN:
        raise ValueError(f"build_simple_cnn got variant {spec.variant.value}")
    module = SimpleCNN(spec.num_classes, spec.input_size)
    return ModelHandle(spec=spec, module=module, optimizer_family=OPTIMIZER_ADAM)


def build_vgg_deep(spec: ModelSpec, weights_dir=None) -> ModelHandle:
    """Trainable VGG base with a 500-unit dense head."""
    if spec.variant not in VGG_DEEP_VARIANTS:
        raise ValueError(f"build_vgg_deep got variant {spec.variant.value}")
    features = _vgg_features(spec.variant, spec.pretrained_backbone, weights_dir)
    module = VggDenseClassifier(features, hidden=500, num_classes=spec.num_classes,
                                input_size=spec.input_size)
    return ModelHandle(spec=spec, module=module, optimizer_family=OPTIMIZER_ADAM)


def build_vgg_shallow(spec: ModelSpec, weights_dir=None) -> ModelHandle:
    """Frozen VGG base with a 256-unit dense head; only the head learns."""
    if spec.variant not in VGG_SHALLOW_VARIANTS:
        raise ValueError(f"build_vgg_shallow got variant {spec.variant.value}")
    features = _vgg_features(spec.variant, spec.pretrained_backbone, weights_dir)
    _freeze(features.parameters())
    module = VggDenseClassifier(features, hidden=256, num_classes=spec.num_classes,
                                input_size=spec.input_size)
    return ModelHandle(spec=spec, module=module, optimizer_family=OPTIMIZER_ADAM)


def build_vgg_finetuned(spec: ModelSpec, weights_dir=None) -> ModelHandle:
    """VGG base with a pooled linear head, fine-tuned batch- or non-batch-wise.

    Batch-wise (``*_ft_b``) freezes everything before the fourth-last
    weighted backbone layer; non-batch-wise (``*_ft_nb``) leaves the whole
    backbone trainable.
    """
    if spec.variant not in VGG_FINETUNED_VARIANTS:
        raise ValueError(f"build_vgg_finetuned got variant {spec.variant.value}")
    features = _vgg_features(spec.variant, spec.pretrained_backbone, weights_dir)
    if spec.variant in (Variant.VGG16_FT_B, Variant.VGG19_FT_B):
        convs = [m for m in features if isinstance(m, nn.Conv2d)]
        for conv in convs[:-FT_TRAINABLE_TAIL]:
            _freeze(conv.parameters())
    module = VggGapClassifier(features, spec.num_classes)
    return ModelHandle(spec=spec, module=module, optimizer_family=OPTIMIZER_SGD)


def build_hybrid(spec: ModelSpec, weights_dir=None) -> ModelHandle:
    """ResNet50 trunk plus transformer encoder over its spatial tokens."""
    if spec.variant is not Variant.HYBRID_CNN_TRANSFORMER:
        raise ValueError(f"build_hybrid got variant {spec.variant.value}")
    resnet = tv_models.resnet50(weights=None)
    if spec.pretrained_backbone:
        _load_pretrained(resnet, "resnet50", weights_dir)
    backbone = nn.Sequential(*list(resnet.children())[:-2])
    _pooled_hw(spec.input_size, 32)  # reject inputs the trunk would collapse
    if spec.hybrid_freeze_backbone:
        _freeze(backbone.parameters())
    module = HybridClassifier(
        backbone,
        num_classes=spec.num_classes,
        encoder_layers=spec.hybrid_encoder_layers,
        attention_heads=spec.hybrid_attention_heads,
        feedforward_dim=spec.hybrid_feedforward_dim,
    )
    return ModelHandle(spec=spec, module=module, optimizer_family=OPTIMIZER_ADAM)


_BUILDERS = {
    Variant.SIMPLE_CNN: build_simple_cnn,
    Variant.VGG16_DEEP: build_vgg_deep,
    Variant.VGG16_SHALLOW: build_vgg_shallow,
    Variant.VGG16_FT_B: build_vgg_finetuned,
    Variant.VGG16_FT_NB: build_vgg_finetuned,
    Variant.VGG19_DEEP: build_vgg_deep,
    Variant.VGG19_SHALLOW: build_vgg_shallow,
    Variant.VGG19_FT_B: build_vgg_finetuned,
    Variant.VGG19_FT_NB: build_vgg_finetuned,
    Variant.HYBRID_CNN_TRANSFORMER: build_hybrid,
}


def build_model(spec: ModelSpec, weights_dir=None, seed: int | None = None) -> ModelHandle:
    """Construct any variant; ``seed`` makes random init reproducible."""
    if seed is not None:
        torch.manual_seed(seed)
    builder = _BUILDERS[spec.variant]
    if builder is build_simple_cnn:
        return builder(spec)
    return builder(spec, weights_dir=weights_dir)


def predict_batch(handle: ModelHandle, batch) -> np.ndarray:
    """Run inference on a float batch B x H x W x 3 in [0, 1].

    Returns softmax probabilities, one row per image. Deterministic:
    dropout is inactive in eval mode.
    """
    if isinstance(batch, np.ndarray):
        x = torch.from_numpy(np.ascontiguousarray(batch))
    elif isinstance(batch, torch.Tensor):
        x = batch
    else:
        raise ValueError(f"batch must be a numpy array or torch tensor, got {type(batch)}")
    h, w = handle.spec.input_size
    if x.ndim != 4 or x.shape[1:] != (h, w, 3):
        raise ValueError(
            f"expected batch of shape (B, {h}, {w}, 3), got {tuple(x.shape)}"
        )
    x = x.float()
    if x.min() < -1e-5 or x.max() > 1.0 + 1e-5:
        raise ValueError("batch values must lie in [0, 1]; scale inputs with to_model_input")
    handle.module.eval()
    with torch.no_grad():
        logits = handle.module(x.permute(0, 3, 1, 2))
        probs = torch.softmax(logits, dim=1)
    return probs.numpy()


CHECKPOINT_FORMAT = "driverbench.checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(handle: ModelHandle, path: Path | str) -> Path:
    """Write a self-describing checkpoint (variant tag, spec echo, weights)."""
    path = Path(path)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "variant": handle.spec.variant.value,
        "spec": handle.spec.to_dict(),
        "optimizer_family": handle.optimizer_family,
        "state_dict": handle.module.state_dict(),
    }
    try:
        torch.save(payload, path)
    except OSError as exc:
        raise ResourceError(f"failed to write checkpoint to {path}: {exc}") from exc
    return path


def load_checkpoint(path: Path | str) -> ModelHandle:
    """Rebuild a model from a checkpoint's embedded variant tag and weights.

    The stored ``pretrained_backbone`` flag is dropped on reload: the
    checkpoint itself supplies every parameter, so no weight files are
    needed.
    """
    path = Path(path)
    if not path.is_file():
        raise ResourceError(f"checkpoint file not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointFormatError(f"corrupt or unreadable checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointFormatError(f"{path} is not a recognized checkpoint file")
    try:
        variant = Variant(payload["variant"])
        spec = ModelSpec.from_dict(payload["spec"])
        state_dict = payload["state_dict"]
    except (KeyError, ValueError) as exc:
        raise CheckpointFormatError(f"checkpoint {path} has an unknown variant or spec: {exc}") from exc
    if spec.variant is not variant:
        raise CheckpointFormatError(f"checkpoint {path} variant tag mismatch")
    handle = build_model(replace(spec, pretrained_backbone=False))
    handle.module.load_state_dict(state_dict)
    handle.optimizer_family = payload.get("optimizer_family", handle.optimizer_family)
    return handle

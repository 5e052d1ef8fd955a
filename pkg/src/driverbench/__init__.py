"""Training and benchmarking of CNN / hybrid driver-distraction classifiers."""

from .augment import AugmentationConfig, change_contrast, enhance_brightness, random_augment, to_model_input
from .benchmark import BenchmarkResult, RankedResult, compare_results, evaluate_model, run_benchmark
from .dataset import (
    CLASS_LABELS,
    ChannelHistogram,
    ClassLabel,
    DatasetManifest,
    SplitSpec,
    compute_channel_histograms,
    scan_dataset,
    select_test_subset,
    stratified_split,
)
from .models import (
    ModelHandle,
    ModelSpec,
    Variant,
    build_model,
    count_parameters,
    load_checkpoint,
    predict_batch,
    save_checkpoint,
)
from .training import (
    EarlyStopState,
    EpochMetrics,
    TrainingConfig,
    TrainingHistory,
    compute_accuracy,
    compute_average_loss,
    early_stop_update,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentationConfig",
    "BenchmarkResult",
    "CLASS_LABELS",
    "ChannelHistogram",
    "ClassLabel",
    "DatasetManifest",
    "EarlyStopState",
    "EpochMetrics",
    "ModelHandle",
    "ModelSpec",
    "RankedResult",
    "SplitSpec",
    "TrainingConfig",
    "TrainingHistory",
    "Variant",
    "build_model",
    "change_contrast",
    "compare_results",
    "compute_accuracy",
    "compute_average_loss",
    "compute_channel_histograms",
    "count_parameters",
    "early_stop_update",
    "enhance_brightness",
    "evaluate_model",
    "load_checkpoint",
    "predict_batch",
    "random_augment",
    "run_benchmark",
    "save_checkpoint",
    "scan_dataset",
    "select_test_subset",
    "stratified_split",
    "to_model_input",
    "train",
]

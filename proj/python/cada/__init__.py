"""Semi-supervised cross-anatomy domain adaptation for vessel segmentation."""

from ._core import (
    Config,
    DataError,
    NumericError,
    UsageError,
    __version__,
    analyze_bn,
    binary_cross_entropy,
    clahe,
    evaluate,
    gamma_correct,
    generate_dataset,
    lambda_rampup,
    load_image,
    metrics,
    predict,
    run_bench,
    save_pgm,
    soft_dice_loss,
    train,
)

__all__ = [
    "Config",
    "DataError",
    "NumericError",
    "UsageError",
    "__version__",
    "analyze_bn",
    "binary_cross_entropy",
    "clahe",
    "evaluate",
    "gamma_correct",
    "generate_dataset",
    "lambda_rampup",
    "load_image",
    "metrics",
    "predict",
    "run_bench",
    "save_pgm",
    "soft_dice_loss",
    "train",
]

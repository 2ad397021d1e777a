"""Python access to the volumetric tumour segmentation core."""

from ._core import (
    Error,
    ShapeError,
    bspline_basis,
    case_metrics,
    dice_iou,
    dynamic_weight,
    evaluate,
    generate_phantom,
    hd95,
    lr_schedule,
    model_counts,
    predict,
    read_nifti,
    train,
    write_nifti,
)

__all__ = [
    "Error",
    "ShapeError",
    "bspline_basis",
    "case_metrics",
    "dice_iou",
    "dynamic_weight",
    "evaluate",
    "generate_phantom",
    "hd95",
    "lr_schedule",
    "model_counts",
    "predict",
    "read_nifti",
    "train",
    "write_nifti",
]

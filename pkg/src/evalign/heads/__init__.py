from evalign.heads.depth import (
    DepthBins,
    DepthHead,
    DepthLossWeights,
    depth_total_loss,
    expected_depth,
    multiscale_gradient_loss,
    si_log_loss,
    valid_depth_mask,
)
from evalign.heads.segmentation import (
    DEFAULT_CLASS_WEIGHTS,
    IGNORE_INDEX,
    SegHead,
    SegLossWeights,
    dice_loss,
    focal_loss,
    seg_forward,
    seg_total_loss,
)
from evalign.heads.train import HEAD_PRESETS, HeadTrainConfig, build_head, train_head

__all__ = [
    "DEFAULT_CLASS_WEIGHTS",
    "DepthBins",
    "DepthHead",
    "DepthLossWeights",
    "HEAD_PRESETS",
    "HeadTrainConfig",
    "IGNORE_INDEX",
    "SegHead",
    "SegLossWeights",
    "build_head",
    "depth_total_loss",
    "dice_loss",
    "expected_depth",
    "focal_loss",
    "multiscale_gradient_loss",
    "seg_forward",
    "seg_total_loss",
    "si_log_loss",
    "train_head",
    "valid_depth_mask",
]

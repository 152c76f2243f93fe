"""Linear segmentation head and its class-weighted focal/dice losses."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn.functional as F
from torch import nn

from evalign.errors import NoValidPixels, ShapeMismatch
from evalign.model.backbone import LatentFeatures

IGNORE_INDEX = 255

# sky, building, fence, person, pole, road, sidewalk, vegetation, car,
# wall, traffic light: minority classes carry heavier penalties
DEFAULT_CLASS_WEIGHTS = (1.0, 1.0, 5.0, 5.0, 5.0, 1.0, 3.0, 2.0, 2.5, 10.0, 15.0)


@dataclass
class SegLossWeights:
    dice: float = 1.0
    focal: float = 1.0
    gamma: float = 2.0
    smooth: float = 1.0
    class_weights: tuple[float, ...] = field(default=DEFAULT_CLASS_WEIGHTS)


class SegHead(nn.Module):
    """1x1 classifier over projected patch tokens, upsampled to pixels."""

    def __init__(self, d_proj: int, classes: int = 11):
        super().__init__()
        self.classes = classes
        self.classifier = nn.Conv2d(d_proj, classes, 1)

    def forward(self, projected: torch.Tensor, out_size: int) -> torch.Tensor:
        """(batch, M, d_proj) projected tokens -> (batch, C, out, out) logits."""
        if projected.dim() == 2:
            projected = projected[None]
        b, m, d = projected.shape
        g = int(m ** 0.5)
        if g * g != m:
            raise ShapeMismatch(f"patch count {m} is not a square grid")
        grid = projected.transpose(1, 2).reshape(b, d, g, g)
        logits = self.classifier(grid)
        if logits.shape[-1] != out_size:
            logits = F.interpolate(
                logits, size=(out_size, out_size), mode="bilinear", align_corners=False
            )
        return logits


def seg_forward(features: LatentFeatures, projector: nn.Module, head: SegHead,
                out_size: int) -> torch.Tensor:
    """Project patch tokens with the frozen teacher projector, then classify."""
    patches = features.patches
    if patches.dim() == 2:
        patches = patches[None]
    with torch.no_grad():
        projected = projector(patches)
    return head(projected, out_size)


def _flatten_valid(logits: torch.Tensor, labels: torch.Tensor):
    if logits.dim() == 3:
        logits = logits[None]
    if labels.dim() == 2:
        labels = labels[None]
    c = logits.shape[1]
    flat_logits = logits.permute(0, 2, 3, 1).reshape(-1, c)
    flat_labels = labels.reshape(-1).long()
    keep = flat_labels != IGNORE_INDEX
    if keep.sum() == 0:
        raise NoValidPixels("all pixels carry the ignore label")
    return flat_logits[keep], flat_labels[keep]


def focal_loss(logits: torch.Tensor, labels: torch.Tensor,
               class_weights=None, gamma: float = 2.0) -> torch.Tensor:
    """Mean over labeled pixels of -w_c (1 - p_c)^gamma log p_c."""
    flat_logits, flat_labels = _flatten_valid(logits, labels)
    log_probs = F.log_softmax(flat_logits, dim=-1)
    picked = log_probs.gather(1, flat_labels[:, None])[:, 0]
    p = picked.exp()
    focal = -((1.0 - p) ** gamma) * picked
    if class_weights is not None:
        w = torch.as_tensor(class_weights, dtype=focal.dtype, device=focal.device)
        focal = focal * w[flat_labels]
    return focal.mean()


def dice_loss(logits: torch.Tensor, labels: torch.Tensor,
              class_weights=None, smooth: float = 1.0) -> torch.Tensor:
    """One minus the weighted mean soft-dice overlap across classes."""
    flat_logits, flat_labels = _flatten_valid(logits, labels)
    c = flat_logits.shape[-1]
    probs = torch.softmax(flat_logits, dim=-1)
    onehot = F.one_hot(flat_labels, c).to(probs.dtype)
    intersection = (probs * onehot).sum(0)
    denom = probs.sum(0) + onehot.sum(0)
    dice = (2.0 * intersection + smooth) / (denom + smooth)
    if class_weights is None:
        return 1.0 - dice.mean()
    w = torch.as_tensor(class_weights, dtype=dice.dtype, device=dice.device)
    return 1.0 - (dice * w).sum() / w.sum()


def seg_total_loss(logits: torch.Tensor, labels: torch.Tensor,
                   weights: SegLossWeights | None = None) -> torch.Tensor:
    weights = weights or SegLossWeights()
    cw = weights.class_weights
    if cw is not None and len(cw) != logits.shape[-3]:
        cw = None  # class count differs from the preset; fall back to uniform
    return (
        weights.dice * dice_loss(logits, labels, cw, weights.smooth)
        + weights.focal * focal_loss(logits, labels, cw, weights.gamma)
    )

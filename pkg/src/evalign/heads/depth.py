"""Depth-binning head and the log-space depth losses."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from evalign.errors import NoValidPixels, ShapeMismatch
from evalign.model.backbone import LatentFeatures


@dataclass
class DepthBins:
    count: int = 256
    d_min: float = 1.0
    d_max: float = 81.0

    def centers(self) -> torch.Tensor:
        return torch.linspace(self.d_min, self.d_max, self.count, dtype=torch.float64)


@dataclass
class DepthLossWeights:
    si: float = 2.0
    msg: float = 0.01
    clamp_min: float = 1.95
    clamp_max: float = 82.0
    si_lambda: float = 0.5
    msg_scales: int = 4


class DepthHead(nn.Module):
    """Two-path bin classifier: spatial 1x1 conv plus a global CLS linear.

    The spatial logits are upsampled 4x before the broadcast CLS logits are
    added; per-pixel softmax over bins turns the fused logits into a
    distribution whose expectation is the predicted depth.
    """

    def __init__(self, d: int, bins: DepthBins | None = None):
        super().__init__()
        self.bins = bins or DepthBins()
        self.spatial = nn.Conv2d(d, self.bins.count, 1)
        self.global_path = nn.Linear(d, self.bins.count)

    def bin_logits(self, features: LatentFeatures, out_size: int | None = None) -> torch.Tensor:
        """Fused per-pixel bin logits, pre-softmax (tiling accumulates these)."""
        patches, cls = _batched(features)
        b, m, d = patches.shape
        g = int(m ** 0.5)
        if g * g != m:
            raise ShapeMismatch(f"patch count {m} is not a square grid")
        grid = patches.transpose(1, 2).reshape(b, d, g, g)
        logits = self.spatial(grid)
        logits = F.interpolate(
            logits, scale_factor=4, mode="bilinear", align_corners=False
        )
        logits = logits + self.global_path(cls)[:, :, None, None]
        if out_size is not None and logits.shape[-1] != out_size:
            logits = F.interpolate(
                logits, size=(out_size, out_size), mode="bilinear", align_corners=False
            )
        return logits

    def forward(self, features: LatentFeatures, out_size: int | None = None) -> torch.Tensor:
        """Depth map in meters, shape (batch, out_size, out_size)."""
        logits = self.bin_logits(features)
        depth = expected_depth(logits, self.bins)
        if out_size is not None and depth.shape[-1] != out_size:
            depth = F.interpolate(
                depth[:, None], size=(out_size, out_size),
                mode="bilinear", align_corners=False,
            )[:, 0]
        # convexity guarantees the range; clamp absorbs resize round-off
        return depth.clamp(self.bins.d_min, self.bins.d_max)


def expected_depth(bin_logits: torch.Tensor, bins: DepthBins) -> torch.Tensor:
    """Softmax expectation over bin centers, computed in double precision.

    The reduction runs over a contiguous last dimension, so uniform logits
    yield the exact mean of the centers (41.0 for the default bins).
    """
    probs = torch.softmax(bin_logits.double(), dim=1)
    centers = bins.centers().to(probs.device)
    return (probs.permute(0, 2, 3, 1).contiguous() * centers).sum(-1)


def _batched(features: LatentFeatures) -> tuple[torch.Tensor, torch.Tensor]:
    patches, cls = features.patches, features.cls
    if patches.dim() == 2:
        patches, cls = patches[None], cls[None]
    return patches, cls


def valid_depth_mask(gt: torch.Tensor) -> torch.Tensor:
    return torch.isfinite(gt) & (gt > 0)


def si_log_loss(pred: torch.Tensor, gt: torch.Tensor, valid: torch.Tensor,
                si_lambda: float = 0.5) -> torch.Tensor:
    """Scale-invariant log loss: mean d^2 - si_lambda * (mean d)^2."""
    if valid.sum() == 0:
        raise NoValidPixels("no valid pixels for the scale-invariant loss")
    d = torch.log(pred[valid]) - torch.log(gt[valid])
    return d.pow(2).mean() - si_lambda * d.mean().pow(2)


def multiscale_gradient_loss(pred_log: torch.Tensor, gt_log: torch.Tensor,
                             valid: torch.Tensor, scales: int = 4) -> torch.Tensor:
    """Mean absolute forward-difference of the log residual across scales.

    Scale k operates on 2^k average-pooled maps; differences touching an
    invalid pixel are excluded, and scales too coarse for the map are skipped.
    """
    if valid.sum() == 0:
        raise NoValidPixels("no valid pixels for the gradient loss")
    residual = torch.where(valid, pred_log - gt_log, torch.zeros_like(pred_log))
    vmask = valid.to(residual.dtype)
    terms = []
    for k in range(scales):
        factor = 2 ** k
        if residual.shape[-1] < factor * 2 or residual.shape[-2] < factor * 2:
            continue
        if factor == 1:
            r, v = residual, vmask
        else:
            r = F.avg_pool2d(residual[None, None], factor)[0, 0]
            v = (F.avg_pool2d(vmask[None, None], factor)[0, 0] == 1.0).to(residual.dtype)
            r = r * v
        dx = (r[:, 1:] - r[:, :-1]).abs()
        vx = v[:, 1:] * v[:, :-1]
        dy = (r[1:, :] - r[:-1, :]).abs()
        vy = v[1:, :] * v[:-1, :]
        n = vx.sum() + vy.sum()
        if n > 0:
            terms.append(((dx * vx).sum() + (dy * vy).sum()) / n)
    if not terms:
        raise NoValidPixels("no scale produced a valid gradient estimate")
    return torch.stack(terms).mean()


def depth_total_loss(pred: torch.Tensor, gt: torch.Tensor,
                     weights: DepthLossWeights | None = None) -> torch.Tensor:
    """Clamp the ground truth, mask invalid pixels, combine SI and gradient."""
    weights = weights or DepthLossWeights()
    valid = valid_depth_mask(gt)
    if valid.sum() == 0:
        raise NoValidPixels("ground truth contains no valid depth")
    gt = torch.where(valid, gt, torch.ones_like(gt))
    gt = gt.clamp(weights.clamp_min, weights.clamp_max)
    si = si_log_loss(pred, gt, valid, weights.si_lambda)
    msg = multiscale_gradient_loss(
        torch.log(pred), torch.log(gt), valid, weights.msg_scales
    )
    return weights.si * si + weights.msg * msg

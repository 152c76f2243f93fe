"""Finite-difference verification of the masked loss gradients."""

from __future__ import annotations

import numpy as np
import torch

from evalign.distill.loss import LossWeights, masked_distill_loss
from evalign.model.backbone import LatentFeatures
from evalign.model.student import StudentModel, Teacher

PARAM_GROUPS = ("embedder", "lora", "norm", "mask_token")


def _group_params(model: StudentModel, group: str) -> list[torch.nn.Parameter]:
    if group == "embedder":
        return list(model.embedder.parameters())
    if group == "lora":
        return [p for n, p in model.named_parameters() if "lora_" in n]
    if group == "norm":
        return [model.core.norm.weight, model.core.norm.bias]
    if group == "mask_token":
        return [model.mask_token]
    raise ValueError(f"unknown parameter group {group!r}")


def grad_check(model: StudentModel, teacher: Teacher, voxel: torch.Tensor,
               proxy: torch.Tensor, mask: torch.Tensor,
               kept: torch.Tensor | None = None,
               weights: LossWeights | None = None,
               groups: tuple[str, ...] = PARAM_GROUPS,
               eps: float = 1e-4, max_coords: int = 200,
               seed: int = 0, corrupt: float = 1.0) -> float:
    """Max scaled error between analytic and central-difference gradients.

    Everything runs in double precision with adapter dropout disabled so the
    loss is a deterministic function of the parameters. Per probed
    coordinate the error is |analytic - fd| normalized by the largest
    finite-difference magnitude in the probe set (coordinates where both
    vanish contribute 0). ``corrupt`` scales the analytic gradient and is
    the negative-control hook: 2.0 must push the error to about 1.
    """
    weights = weights or LossWeights()
    model = model.double().eval()
    teacher = teacher.double().eval()
    voxel = voxel.double()
    proxy = proxy.double()

    def loss_value() -> torch.Tensor:
        with torch.no_grad():
            target = teacher(proxy)
        feats = model(voxel, kept)
        sample = LatentFeatures(cls=feats.cls[0], patches=feats.patches[0])
        target = LatentFeatures(cls=target.cls[0], patches=target.patches[0])
        return masked_distill_loss(sample, target, mask, weights)["total"]

    params = [p for g in groups for p in _group_params(model, g)]
    for p in params:
        p.grad = None
    loss = loss_value()
    loss.backward()

    coords = []
    for pi, p in enumerate(params):
        for flat_idx in range(p.numel()):
            coords.append((pi, flat_idx))
    rng = np.random.default_rng(seed)
    if len(coords) > max_coords:
        chosen = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[i] for i in chosen]

    analytic, fd = [], []
    with torch.no_grad():
        for pi, flat_idx in coords:
            p = params[pi]
            grad = 0.0 if p.grad is None else float(p.grad.reshape(-1)[flat_idx])
            original = float(p.reshape(-1)[flat_idx])
            p.reshape(-1)[flat_idx] = original + eps
            f_plus = float(loss_value())
            p.reshape(-1)[flat_idx] = original - eps
            f_minus = float(loss_value())
            p.reshape(-1)[flat_idx] = original
            analytic.append(corrupt * grad)
            fd.append((f_plus - f_minus) / (2.0 * eps))

    analytic = np.asarray(analytic)
    fd = np.asarray(fd)
    scale = np.abs(fd).max()
    if scale == 0.0:
        return 0.0 if np.abs(analytic).max() == 0.0 else float("inf")
    return float(np.abs(analytic - fd).max() / scale)

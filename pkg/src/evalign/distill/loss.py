"""The masked composite alignment loss on teacher/student token pairs."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from evalign.errors import EmptyMask, NonFiniteFeature
from evalign.model.backbone import LatentFeatures

COSINE_EPS = 1e-8


@dataclass
class LossWeights:
    mse: float = 0.1
    cos: float = 0.3
    l1: float = 0.6

    def __post_init__(self):
        if min(self.mse, self.cos, self.l1) < 0:
            raise ValueError("loss weights must be non-negative")


def _one_minus_cosine(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    # 1 - cos(a, b) written as (|a-b|^2 - (|a|-|b|)^2) / (2 |a| |b|): identical
    # in exact arithmetic, but equal tokens (zero pairs included) cost exactly
    # 0 instead of a rounding residue; the eps guards the zero-norm case
    na, nb = a.norm(dim=-1), b.norm(dim=-1)
    num = (a - b).pow(2).sum(-1) - (na - nb).pow(2)
    return torch.clamp(num, min=0.0) / (2.0 * torch.clamp(na * nb, min=COSINE_EPS))


def _token_terms(a: torch.Tensor, b: torch.Tensor) -> tuple[torch.Tensor, ...]:
    diff = a - b
    mse = diff.pow(2).mean(-1)
    l1 = diff.abs().mean(-1)
    return mse, _one_minus_cosine(a, b), l1


def masked_distill_loss(student: LatentFeatures, teacher: LatentFeatures,
                        mask: torch.Tensor, weights: LossWeights,
                        include_cls: bool = True) -> dict[str, torch.Tensor]:
    """Mask-weighted token alignment loss for one sample.

    Per masked patch token: a per-dimension MSE, one minus the cosine
    similarity, and a per-dimension L1 distance, combined with the
    configured weights. The CLS pair contributes one additional unmasked
    term (weight 1) that joins the average. Tokens outside the mask are
    never touched, so the loss is exactly invariant to them.

    Returns total plus the mse/cos/l1 components over the same denominator.
    """
    if not (torch.isfinite(student.patches).all() and torch.isfinite(student.cls).all()):
        raise NonFiniteFeature("student features contain non-finite values")
    if not (torch.isfinite(teacher.patches).all() and torch.isfinite(teacher.cls).all()):
        raise NonFiniteFeature("teacher features contain non-finite values")

    flat = torch.as_tensor(mask).reshape(-1).bool()
    idx = torch.nonzero(flat, as_tuple=True)[0]
    if idx.numel() == 0:
        raise EmptyMask("distillation mask selects no tokens")

    mse, cos, l1 = _token_terms(student.patches[idx], teacher.patches[idx])
    mse, cos, l1 = mse.sum(), cos.sum(), l1.sum()
    denom = float(idx.numel())
    if include_cls:
        cls_mse, cls_cos, cls_l1 = _token_terms(
            student.cls.reshape(1, -1), teacher.cls.reshape(1, -1)
        )
        mse = mse + cls_mse.sum()
        cos = cos + cls_cos.sum()
        l1 = l1 + cls_l1.sum()
        denom += 1.0

    out = {"mse": mse / denom, "cos": cos / denom, "l1": l1 / denom}
    out["total"] = (
        weights.mse * out["mse"] + weights.cos * out["cos"] + weights.l1 * out["l1"]
    )
    return out

"""The student network and the frozen synthetic teacher."""

from __future__ import annotations

import torch
from torch import nn

from evalign.errors import ShapeMismatch
from evalign.model.backbone import (
    LatentFeatures,
    TransformerCore,
    _xavier_std,
    inject_lora,
    lora_modules,
)
from evalign.model.config import StudentConfig
from evalign.model.embedder import VoxelEmbedder


class StudentModel(nn.Module):
    """Voxel embedder + frozen transformer with low-rank adapters.

    Trainable parameter groups: the embedder, the adapter factors, the final
    normalization layer, and the mask token. Everything else is frozen at
    construction and stays bit-identical through training.
    """

    def __init__(self, cfg: StudentConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        g = torch.Generator().manual_seed(seed)
        self.embedder = VoxelEmbedder(cfg, generator=g)
        self.core = TransformerCore(cfg, generator=g)
        for p in self.core.parameters():
            p.requires_grad_(False)
        inject_lora(self.core, cfg, generator=g)
        self.core.norm.weight.requires_grad_(True)
        self.core.norm.bias.requires_grad_(True)
        mask = torch.empty(cfg.d)
        mask.normal_(0.0, 0.02, generator=g)
        self.mask_token = nn.Parameter(mask)

    def backbone_forward(self, tokens: torch.Tensor,
                         kept: torch.Tensor | None = None) -> LatentFeatures:
        """Run the adapted backbone; dropped positions get the mask token.

        ``kept`` is a 1-D index tensor of surviving patch tokens. The output
        always has all M patch positions plus CLS, so the distillation loss
        is defined everywhere.
        """
        if kept is not None:
            m = tokens.shape[1]
            keep_mask = torch.zeros(m, dtype=torch.bool, device=tokens.device)
            keep_mask[kept] = True
            tokens = torch.where(
                keep_mask[None, :, None], tokens, self.mask_token.to(tokens.dtype)
            )
        return self.core(tokens)

    def forward(self, voxels: torch.Tensor,
                kept: torch.Tensor | None = None) -> LatentFeatures:
        return self.backbone_forward(self.embedder(voxels), kept)

    def trainable_parameters(self) -> list[nn.Parameter]:
        return [p for p in self.parameters() if p.requires_grad]

    def adapters(self):
        return lora_modules(self.core)


class Teacher(nn.Module):
    """Frozen reference encoder over proxy images, plus a frozen projector.

    Weights are drawn deterministically from the seed, so two teachers with
    the same seed are bit-identical and the features they emit are stable
    training targets.
    """

    def __init__(self, cfg: StudentConfig, seed: int = 1):
        super().__init__()
        self.cfg = cfg
        g = torch.Generator().manual_seed(seed)
        self.patch_embed = nn.Conv2d(
            cfg.teacher_channels, cfg.d, cfg.patch, stride=cfg.patch
        )
        self.core = TransformerCore(cfg, generator=g)
        self.projector = nn.Linear(cfg.d, cfg.d_proj)
        for m in (self.patch_embed, self.projector):
            m.weight.data.normal_(0.0, _xavier_std(m.weight), generator=g)
            m.bias.data.zero_()
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, images: torch.Tensor) -> LatentFeatures:
        if images.shape[1] != self.cfg.teacher_channels:
            raise ShapeMismatch(
                f"teacher expects {self.cfg.teacher_channels} channels, "
                f"got {images.shape[1]}"
            )
        if images.shape[-1] % self.cfg.patch or images.shape[-2] % self.cfg.patch:
            raise ShapeMismatch("teacher input must be divisible by the patch size")
        x = self.patch_embed(images)
        if x.shape[-2:] != (self.cfg.grid, self.cfg.grid):
            raise ShapeMismatch(
                f"teacher input implies a {tuple(x.shape[-2:])} token grid, "
                f"expected {self.cfg.grid}x{self.cfg.grid}"
            )
        tokens = x.flatten(2).transpose(1, 2)
        return self.core(tokens)

    def project(self, features: LatentFeatures) -> torch.Tensor:
        """Frozen projector applied to patch tokens (d -> d_proj)."""
        return self.projector(features.patches)

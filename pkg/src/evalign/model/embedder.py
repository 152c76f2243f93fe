"""Convolutional voxel embedder: the trainable entry point of the student."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from evalign.errors import ShapeMismatch
from evalign.model.backbone import init_weights
from evalign.model.config import StudentConfig


class ResidualDown(nn.Module):
    """Residual block that halves the spatial size and doubles the channels."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, stride=1, padding=1)
        self.skip = nn.Conv2d(c_in, c_out, 1, stride=2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.relu(self.skip(x) + self.conv2(F.relu(self.conv1(x))))


class VoxelEmbedder(nn.Module):
    """7x7 stem, three downsampling stages, 1x1 projection, adaptive pool.

    Output is a (batch, G*G, d) token sequence regardless of the input
    resolution; the adaptive average pool absorbs non-divisible sizes.
    """

    def __init__(self, cfg: StudentConfig, generator: torch.Generator | None = None):
        super().__init__()
        base = cfg.embedder_base
        self.bins = cfg.bins
        self.grid = cfg.grid
        self.stem = nn.Conv2d(cfg.bins, base, 7, stride=2, padding=3)
        self.stages = nn.ModuleList(
            [
                ResidualDown(base, base * 2),
                ResidualDown(base * 2, base * 4),
                ResidualDown(base * 4, base * 8),
            ]
        )
        self.proj = nn.Conv2d(base * 8, cfg.d, 1)
        init_weights(self, generator)

    def forward(self, voxels: torch.Tensor) -> torch.Tensor:
        if voxels.shape[1] != self.bins:
            raise ShapeMismatch(
                f"embedder expects {self.bins} input bins, got {voxels.shape[1]}"
            )
        x = F.relu(self.stem(voxels))
        for stage in self.stages:
            x = stage(x)
        x = self.proj(x)
        x = F.adaptive_avg_pool2d(x, (self.grid, self.grid))
        return x.flatten(2).transpose(1, 2)  # (batch, G*G, d)

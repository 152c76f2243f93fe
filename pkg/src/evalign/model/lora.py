"""Low-rank adapters on frozen linear layers: injection and merge."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn


class LoRALinear(nn.Module):
    """A frozen linear layer with a trainable low-rank update.

    Forward: y = W x + b + (alpha / rank) * B (A dropout(x)), with A shaped
    (rank, d_in) and B shaped (d_out, rank). B starts at zero so a fresh
    adapter is exactly the frozen layer; A gets small random values.
    Dropout applies only to the adapter branch and only in train mode.
    """

    def __init__(self, base: nn.Linear, rank: int, alpha: float,
                 dropout: float = 0.0,
                 generator: torch.Generator | None = None):
        super().__init__()
        self.base = base
        self.base.weight.requires_grad_(False)
        if self.base.bias is not None:
            self.base.bias.requires_grad_(False)
        d_out, d_in = base.weight.shape
        self.rank = rank
        self.scale = alpha / rank
        self.dropout = dropout
        a = torch.empty(rank, d_in, dtype=base.weight.dtype)
        a.normal_(0.0, 0.02, generator=generator)
        self.lora_A = nn.Parameter(a)
        self.lora_B = nn.Parameter(torch.zeros(d_out, rank, dtype=base.weight.dtype))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = F.linear(x, self.base.weight, self.base.bias)
        h = x
        if self.training and self.dropout > 0:
            h = F.dropout(h, self.dropout)
        return y + F.linear(F.linear(h, self.lora_A), self.lora_B) * self.scale


def lora_merge(adapter: LoRALinear) -> torch.Tensor:
    """Effective dense weight W + (alpha/rank) * B A, shape (d_out, d_in)."""
    with torch.no_grad():
        return adapter.base.weight + adapter.scale * (adapter.lora_B @ adapter.lora_A)


def merged_linear(adapter: LoRALinear) -> nn.Linear:
    """A plain linear layer equal to the adapter's eval-mode forward."""
    d_out, d_in = adapter.base.weight.shape
    out = nn.Linear(d_in, d_out, bias=adapter.base.bias is not None)
    with torch.no_grad():
        out.weight.copy_(lora_merge(adapter))
        if adapter.base.bias is not None:
            out.bias.copy_(adapter.base.bias)
    return out

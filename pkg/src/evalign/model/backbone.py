"""Transformer core shared by the student and the frozen teacher."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from evalign.errors import NonFiniteFeature, ShapeMismatch
from evalign.model.config import StudentConfig
from evalign.model.lora import LoRALinear


@dataclass
class LatentFeatures:
    """Final-norm outputs: one class token and M patch tokens of width d."""

    cls: torch.Tensor      # (..., d)
    patches: torch.Tensor  # (..., M, d)

    def require_finite(self, who: str = "features") -> "LatentFeatures":
        if not (torch.isfinite(self.cls).all() and torch.isfinite(self.patches).all()):
            raise NonFiniteFeature(f"{who} contain non-finite values")
        return self

    def detach(self) -> "LatentFeatures":
        return LatentFeatures(self.cls.detach(), self.patches.detach())


class Attention(nn.Module):
    def __init__(self, d: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = d // heads
        self.qkv = nn.Linear(d, 3 * d)
        self.proj = nn.Linear(d, d)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, n, d = x.shape
        qkv = self.qkv(x).reshape(b, n, 3, self.heads, self.head_dim)
        q, k, v = qkv.permute(2, 0, 3, 1, 4).unbind(0)  # each (b, h, n, hd)
        attn = (q @ k.transpose(-2, -1)) * self.head_dim ** -0.5
        attn = attn.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, d)
        return self.proj(out)


class Mlp(nn.Module):
    def __init__(self, d: int, mlp_ratio: float):
        super().__init__()
        hidden = int(d * mlp_ratio)
        self.fc1 = nn.Linear(d, hidden)
        self.fc2 = nn.Linear(hidden, d)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(nn.functional.gelu(self.fc1(x)))


class Block(nn.Module):
    # pre-norm residual block with per-branch learnable scales
    def __init__(self, d: int, heads: int, mlp_ratio: float):
        super().__init__()
        self.norm1 = nn.LayerNorm(d)
        self.attn = Attention(d, heads)
        self.ls1 = nn.Parameter(torch.ones(d))
        self.norm2 = nn.LayerNorm(d)
        self.mlp = Mlp(d, mlp_ratio)
        self.ls2 = nn.Parameter(torch.ones(d))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.ls1 * self.attn(self.norm1(x))
        return x + self.ls2 * self.mlp(self.norm2(x))


class TransformerCore(nn.Module):
    """CLS + positional embeddings, a block stack, and the final norm."""

    def __init__(self, cfg: StudentConfig, generator: torch.Generator | None = None):
        super().__init__()
        self.cfg = cfg
        m = cfg.tokens
        self.cls_token = nn.Parameter(torch.empty(1, 1, cfg.d))
        self.pos_embed = nn.Parameter(torch.empty(1, m + 1, cfg.d))
        self.blocks = nn.ModuleList(
            Block(cfg.d, cfg.heads, cfg.mlp_ratio) for _ in range(cfg.layers)
        )
        self.norm = nn.LayerNorm(cfg.d)
        init_weights(self, generator)

    def forward(self, tokens: torch.Tensor) -> LatentFeatures:
        if tokens.shape[-2:] != (self.cfg.tokens, self.cfg.d):
            raise ShapeMismatch(
                f"expected (*, {self.cfg.tokens}, {self.cfg.d}) tokens, "
                f"got {tuple(tokens.shape)}"
            )
        b = tokens.shape[0]
        x = tokens + self.pos_embed[:, 1:]
        cls = (self.cls_token + self.pos_embed[:, :1]).expand(b, -1, -1)
        x = torch.cat([cls, x], dim=1)
        for block in self.blocks:
            x = block(x)
        x = self.norm(x)
        return LatentFeatures(cls=x[:, 0], patches=x[:, 1:])


def _xavier_std(weight: torch.Tensor) -> float:
    fan_out, fan_in = weight.shape[0], weight[0].numel()
    return (2.0 / (fan_in + fan_out)) ** 0.5


def init_weights(module: nn.Module, generator: torch.Generator | None) -> None:
    """Deterministic init: unit-gain normal weights, zero biases, unit norms.

    Xavier scaling keeps the activation magnitude of the frozen random
    networks healthy through depth, so their features are usable targets.
    """
    for m in module.modules():
        if isinstance(m, (nn.Linear, nn.Conv2d)):
            m.weight.data.normal_(0.0, _xavier_std(m.weight), generator=generator)
            if m.bias is not None:
                m.bias.data.zero_()
        elif isinstance(m, nn.LayerNorm):
            m.weight.data.fill_(1.0)
            m.bias.data.zero_()
    for name, p in module.named_parameters(recurse=False):
        if name in ("cls_token", "pos_embed", "mask_token"):
            p.data.normal_(0.0, 0.02, generator=generator)


def inject_lora(core: TransformerCore, cfg: StudentConfig,
                generator: torch.Generator | None = None) -> TransformerCore:
    """Wrap the configured linears of every block with low-rank adapters."""
    for block in core.blocks:
        if "qkv" in cfg.lora_targets:
            block.attn.qkv = _wrap(block.attn.qkv, cfg, generator)
        if "proj" in cfg.lora_targets:
            block.attn.proj = _wrap(block.attn.proj, cfg, generator)
        if "fc1" in cfg.lora_targets:
            block.mlp.fc1 = _wrap(block.mlp.fc1, cfg, generator)
        if "fc2" in cfg.lora_targets:
            block.mlp.fc2 = _wrap(block.mlp.fc2, cfg, generator)
    return core


def _wrap(linear: nn.Linear, cfg: StudentConfig,
          generator: torch.Generator | None) -> LoRALinear:
    return LoRALinear(
        linear, cfg.lora_rank, cfg.lora_alpha, cfg.lora_dropout, generator
    )


def lora_modules(core: TransformerCore) -> list[LoRALinear]:
    return [m for m in core.modules() if isinstance(m, LoRALinear)]

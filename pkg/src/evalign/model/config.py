"""Model geometry configuration and the two built-in presets."""

from __future__ import annotations

from dataclasses import dataclass, field

LORA_TARGETS = ("qkv", "proj", "fc1", "fc2")


@dataclass
class StudentConfig:
    """Geometry of the student/teacher stack.

    ``toy`` runs in seconds on a laptop core; ``paper`` reproduces the
    full-scale token geometry for shape and parameter-count checks only.
    """

    d: int = 32                      # token width
    grid: int = 8                    # tokens per side (M = grid^2)
    layers: int = 2
    heads: int = 4
    mlp_ratio: float = 4.0
    lora_rank: int = 4
    lora_alpha: float = 8.0
    lora_dropout: float = 0.10
    lora_targets: tuple[str, ...] = LORA_TARGETS
    embedder_base: int = 16          # stem output channels; stages double it
    bins: int = 5                    # voxel-grid temporal bins
    input_size: int = 112            # square input resolution
    patch: int = 14                  # pixels per token patch
    d_proj: int = 64                 # frozen projector output width
    teacher_channels: int = 1        # proxy-image channels

    def __post_init__(self):
        if self.d % self.heads:
            raise ValueError("d must be divisible by heads")
        if self.lora_rank < 1:
            raise ValueError("lora_rank must be >= 1")
        unknown = set(self.lora_targets) - set(LORA_TARGETS)
        if unknown:
            raise ValueError(f"unknown lora targets: {sorted(unknown)}")

    @property
    def tokens(self) -> int:
        return self.grid * self.grid


def toy_config(**overrides) -> StudentConfig:
    return StudentConfig(**overrides)


def paper_config(**overrides) -> StudentConfig:
    base = dict(
        d=768, grid=32, layers=12, heads=12, mlp_ratio=4.0,
        lora_rank=32, lora_alpha=64.0, lora_dropout=0.10,
        embedder_base=64, bins=5, input_size=448, patch=14,
        d_proj=1024, teacher_channels=1,
    )
    base.update(overrides)
    return StudentConfig(**base)


PRESETS = {"toy": toy_config, "paper": paper_config}

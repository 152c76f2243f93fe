"""Closed-form parameter accounting by component.

The formulas enumerate exactly what the modules allocate; a test
cross-checks them against materialized toy-scale modules.
"""

from __future__ import annotations

from evalign.model.config import StudentConfig


def count_embedder(cfg: StudentConfig) -> int:
    base, bins, d = cfg.embedder_base, cfg.bins, cfg.d
    total = bins * base * 49 + base  # 7x7 stem
    c = base
    for _ in range(3):
        conv1 = 9 * c * (2 * c) + 2 * c
        conv2 = 9 * (2 * c) * (2 * c) + 2 * c
        skip = c * (2 * c) + 2 * c
        total += conv1 + conv2 + skip
        c *= 2
    total += c * d + d  # 1x1 projection
    return total


def _block_linears(cfg: StudentConfig) -> dict[str, tuple[int, int]]:
    d = cfg.d
    hidden = int(d * cfg.mlp_ratio)
    return {
        "qkv": (d, 3 * d),
        "proj": (d, d),
        "fc1": (d, hidden),
        "fc2": (hidden, d),
    }


def count_backbone(cfg: StudentConfig) -> int:
    d, m = cfg.d, cfg.tokens
    per_layer = sum(
        d_in * d_out + d_out for d_in, d_out in _block_linears(cfg).values()
    )
    per_layer += 2 * (2 * d)  # two layer norms
    per_layer += 2 * d        # two branch scales
    total = cfg.layers * per_layer
    total += 2 * d            # final norm
    total += d                # class token
    total += d                # mask token
    total += (m + 1) * d      # positional embeddings
    return total


def count_lora(cfg: StudentConfig) -> int:
    linears = _block_linears(cfg)
    per_layer = sum(
        cfg.lora_rank * (linears[t][0] + linears[t][1]) for t in cfg.lora_targets
    )
    return cfg.layers * per_layer


def count_depth_head(d: int, bins: int) -> int:
    # spatial 1x1 conv and global linear, both d -> bins with bias
    return 2 * (d * bins + bins)


def count_seg_head(d_proj: int, classes: int) -> int:
    return d_proj * classes + classes


def count_params(cfg: StudentConfig, depth_bins: int = 256,
                 seg_classes: int = 11) -> dict[str, int]:
    """Exact per-component counts plus trainable/total rollups."""
    embedder = count_embedder(cfg)
    backbone = count_backbone(cfg)
    lora = count_lora(cfg)
    counts = {
        "embedder": embedder,
        "backbone": backbone,
        "lora": lora,
        "head_depth": count_depth_head(cfg.d, depth_bins),
        "head_seg": count_seg_head(cfg.d_proj, seg_classes),
    }
    # trainable: embedder, adapters, final norm, mask token
    counts["trainable"] = embedder + lora + 2 * cfg.d + cfg.d
    counts["total"] = embedder + backbone + lora
    return counts

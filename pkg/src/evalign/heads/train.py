"""Head training against frozen teacher features (zero-shot transfer means
the same heads later run unchanged on student features).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from evalign.errors import EmptyBatch
from evalign.heads.depth import DepthBins, DepthHead, DepthLossWeights, depth_total_loss
from evalign.heads.segmentation import SegHead, SegLossWeights, seg_total_loss
from evalign.model.student import Teacher

HEAD_PRESETS = {
    "seg": {"lr": 1e-4, "weight_decay": 0.01, "batch": 128},
    "depth": {"lr": 5e-5, "weight_decay": 0.01, "batch": 128},
}


@dataclass
class HeadTrainConfig:
    kind: str                 # "depth" | "seg"
    epochs: int = 1
    batch: int | None = None
    lr: float | None = None
    weight_decay: float | None = None
    grad_clip_norm: float = 1.0
    seed: int = 0
    max_steps: int | None = None
    out_size: int | None = None
    classes: int = 11
    depth_bins: DepthBins | None = None

    def __post_init__(self):
        if self.kind not in HEAD_PRESETS:
            raise ValueError(f"unknown head kind {self.kind!r}")
        preset = HEAD_PRESETS[self.kind]
        self.lr = preset["lr"] if self.lr is None else self.lr
        self.weight_decay = (
            preset["weight_decay"] if self.weight_decay is None else self.weight_decay
        )
        self.batch = preset["batch"] if self.batch is None else self.batch


def build_head(cfg: HeadTrainConfig, teacher: Teacher) -> torch.nn.Module:
    if cfg.kind == "seg":
        return SegHead(teacher.cfg.d_proj, cfg.classes)
    return DepthHead(teacher.cfg.d, cfg.depth_bins or DepthBins())


def train_head(teacher: Teacher, data, cfg: HeadTrainConfig,
               head: torch.nn.Module | None = None,
               seg_weights: SegLossWeights | None = None,
               depth_weights: DepthLossWeights | None = None):
    """Optimize only the head on frozen teacher features.

    Pass an already-trained ``head`` to continue on new data (the two-stage
    curriculum trains on synthetic scenes first, then fine-tunes). Returns
    the head and the per-step loss records.
    """
    if not data:
        raise EmptyBatch("head training needs at least one sample")
    torch.manual_seed(cfg.seed)
    head = head if head is not None else build_head(cfg, teacher)
    out_size = cfg.out_size or teacher.cfg.input_size
    teacher.eval()

    # teacher features never change, so compute them once
    cached = []
    with torch.no_grad():
        for sample in data:
            feats = teacher(torch.from_numpy(sample.proxy_image)[None])
            projected = teacher.project(feats) if cfg.kind == "seg" else None
            cached.append((feats, projected, sample))

    optimizer = torch.optim.AdamW(
        head.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay
    )
    rows = []
    step = 0
    for epoch in range(cfg.epochs):
        order = np.random.default_rng(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(epoch,))
        ).permutation(len(cached))
        for lo in range(0, len(cached), cfg.batch):
            if cfg.max_steps is not None and step >= cfg.max_steps:
                return head, rows
            optimizer.zero_grad(set_to_none=True)
            picked = order[lo:lo + cfg.batch]
            if cfg.kind == "seg":
                # one batch-level loss: dice overlap pools every sample, so
                # classes absent from single images do not distort it
                logits = torch.cat(
                    [head(cached[i][1], out_size) for i in picked]
                )
                labels = torch.stack(
                    [
                        torch.from_numpy(np.ascontiguousarray(cached[i][2].seg_labels))
                        for i in picked
                    ]
                ).long()
                total = seg_total_loss(logits, labels, seg_weights)
            else:
                total = None
                for i in picked:
                    feats, _, sample = cached[i]
                    pred = head(feats, out_size)[0]
                    gt = torch.from_numpy(np.ascontiguousarray(sample.depth))
                    loss = depth_total_loss(pred, gt, depth_weights)
                    total = loss if total is None else total + loss
                total = total / len(picked)
            total.backward()
            torch.nn.utils.clip_grad_norm_(head.parameters(), cfg.grad_clip_norm)
            optimizer.step()
            rows.append({"step": step, "epoch": epoch, "loss": float(total.detach())})
            step += 1
    return head, rows

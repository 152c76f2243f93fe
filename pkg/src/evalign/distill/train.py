"""Distillation optimization loop: masking curriculum, token dropout,
gradient accumulation with global-norm clipping, and a per-step record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from evalign.distill.loss import LossWeights, masked_distill_loss
from evalign.distill.synthetic import PairedSample
from evalign.errors import EmptyBatch
from evalign.masking import DropoutSpec, MaskSchedule, mask_at_epoch, sample_token_dropout
from evalign.model.backbone import LatentFeatures
from evalign.model.config import StudentConfig
from evalign.model.student import StudentModel, Teacher
from evalign.representation import encode_voxel_grid, normalize_voxel_grid

LOSS_CSV_COLUMNS = (
    "step", "epoch", "radius", "kept_tokens",
    "loss_total", "loss_mse", "loss_cos", "loss_l1", "grad_norm",
)


@dataclass
class TrainConfig:
    epochs: int = 30
    micro_batch: int = 128
    accumulation: int = 4
    grad_clip_norm: float = 1.0
    lr: float = 1e-3
    lr_schedule: str = "constant"  # constant | cosine
    weight_decay: float = 0.01
    seed: int = 0
    max_steps: int | None = None
    include_cls: bool = True

    def __post_init__(self):
        if self.grad_clip_norm <= 0 or self.lr < 0:
            raise ValueError("grad_clip_norm must be > 0 and lr >= 0")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError("lr_schedule must be constant or cosine")

    @property
    def effective_batch(self) -> int:
        return self.micro_batch * self.accumulation


@dataclass
class PreparedSample:
    voxel: torch.Tensor   # (bins, H, W) normalized
    proxy: torch.Tensor   # (channels, H, W)
    base_mask: object     # PatchMask


@dataclass
class TrainState:
    model: StudentModel
    teacher: Teacher
    optimizer: torch.optim.Optimizer
    weights: LossWeights = field(default_factory=LossWeights)
    schedule: MaskSchedule = field(default_factory=MaskSchedule)
    dropout: DropoutSpec = field(default_factory=DropoutSpec)
    config: TrainConfig = field(default_factory=TrainConfig)


def prepare_sample(sample: PairedSample, cfg: StudentConfig) -> PreparedSample:
    grid = encode_voxel_grid(sample.window, cfg.bins, cfg.input_size, cfg.input_size)
    grid = normalize_voxel_grid(grid)
    return PreparedSample(
        voxel=torch.from_numpy(grid.values.astype(np.float32)),
        proxy=torch.from_numpy(sample.proxy_image),
        base_mask=sample.base_mask,
    )


def make_state(model_cfg: StudentConfig, train_cfg: TrainConfig,
               weights: LossWeights | None = None,
               schedule: MaskSchedule | None = None,
               dropout: DropoutSpec | None = None,
               model_seed: int = 0, teacher_seed: int = 1) -> TrainState:
    model = StudentModel(model_cfg, seed=model_seed)
    teacher = Teacher(model_cfg, seed=teacher_seed).eval()
    optimizer = torch.optim.AdamW(
        model.trainable_parameters(),
        lr=train_cfg.lr,
        weight_decay=train_cfg.weight_decay,
    )
    return TrainState(
        model=model,
        teacher=teacher,
        optimizer=optimizer,
        weights=weights or LossWeights(),
        schedule=schedule or MaskSchedule(),
        dropout=dropout or DropoutSpec(),
        config=train_cfg,
    )


def train_step(state: TrainState, batch: list[PreparedSample], epoch: int,
               step: int) -> dict:
    """One optimizer update over the accumulated micro-batches of ``batch``.

    Skips samples whose dilated mask is empty; the reported losses average
    over the samples actually used, while the backward pass sums sample
    losses within a micro-batch and averages across accumulation chunks.
    """
    if not batch:
        raise EmptyBatch("train_step got an empty batch")
    cfg = state.config
    model, teacher = state.model, state.teacher
    model.train()

    progress = step if state.schedule.is_linear else epoch
    radius = state.schedule.radius_at(progress)

    chunks = [
        batch[i:i + cfg.micro_batch] for i in range(0, len(batch), cfg.micro_batch)
    ]
    state.optimizer.zero_grad(set_to_none=True)

    sums = {"total": 0.0, "mse": 0.0, "cos": 0.0, "l1": 0.0}
    used = skipped = 0
    kept_count = model.cfg.tokens
    for chunk_idx, chunk in enumerate(chunks):
        masks, keep_rows = [], []
        for row, sample in enumerate(chunk):
            dilated = mask_at_epoch(sample.base_mask, progress, state.schedule)
            if dilated.active_count() == 0:
                skipped += 1
                continue
            masks.append(dilated)
            keep_rows.append(row)
        if not keep_rows:
            continue
        voxels = torch.stack([chunk[r].voxel for r in keep_rows])
        proxies = torch.stack([chunk[r].proxy for r in keep_rows])
        kept = torch.from_numpy(
            sample_token_dropout(
                model.cfg.tokens, state.dropout, epoch,
                draw_index=step * cfg.accumulation + chunk_idx,
            )
        )
        kept_count = int(kept.numel())
        with torch.no_grad():
            target = teacher(proxies)
        feats = model(voxels, kept if kept_count < model.cfg.tokens else None)

        chunk_total = None
        for i, mask in enumerate(masks):
            sample_feats = LatentFeatures(cls=feats.cls[i], patches=feats.patches[i])
            sample_target = LatentFeatures(cls=target.cls[i], patches=target.patches[i])
            parts = masked_distill_loss(
                sample_feats, sample_target,
                torch.from_numpy(mask.flat()), state.weights,
                include_cls=cfg.include_cls,
            )
            chunk_total = parts["total"] if chunk_total is None else chunk_total + parts["total"]
            for key in ("total", "mse", "cos", "l1"):
                sums[key] += float(parts[key].detach())
            used += 1
        (chunk_total / len(chunks)).backward()

    if used == 0:
        state.optimizer.zero_grad(set_to_none=True)
        return {
            "step": step, "epoch": epoch, "radius": radius,
            "kept_tokens": kept_count, "loss_total": float("nan"),
            "loss_mse": float("nan"), "loss_cos": float("nan"),
            "loss_l1": float("nan"), "grad_norm": 0.0,
            "used": 0, "skipped": skipped,
        }

    grad_norm = torch.nn.utils.clip_grad_norm_(
        model.trainable_parameters(), cfg.grad_clip_norm
    )
    state.optimizer.step()

    return {
        "step": step, "epoch": epoch, "radius": radius, "kept_tokens": kept_count,
        "loss_total": sums["total"] / used, "loss_mse": sums["mse"] / used,
        "loss_cos": sums["cos"] / used, "loss_l1": sums["l1"] / used,
        "grad_norm": float(grad_norm), "used": used, "skipped": skipped,
    }


def _lr_at(cfg: TrainConfig, step: int, total_steps: int) -> float:
    if cfg.lr_schedule == "cosine" and total_steps > 0:
        return cfg.lr * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))
    return cfg.lr


def run_distillation(model_cfg: StudentConfig, train_cfg: TrainConfig,
                     data: list[PairedSample],
                     weights: LossWeights | None = None,
                     schedule: MaskSchedule | None = None,
                     dropout: DropoutSpec | None = None,
                     model_seed: int = 0, teacher_seed: int = 1,
                     on_step=None) -> tuple[TrainState, list[dict]]:
    """Full loop over epochs; returns the trained state and per-step records.

    Deterministic given (config, seeds, data): the global torch seed drives
    adapter dropout, and batch order comes from a per-epoch seeded shuffle.
    """
    torch.manual_seed(train_cfg.seed)
    state = make_state(
        model_cfg, train_cfg, weights, schedule, dropout, model_seed, teacher_seed
    )
    prepared = [prepare_sample(s, model_cfg) for s in data]

    steps_per_epoch = max(1, math.ceil(len(prepared) / train_cfg.effective_batch))
    total_steps = train_cfg.epochs * steps_per_epoch
    if train_cfg.max_steps is not None:
        total_steps = min(total_steps, train_cfg.max_steps)

    rows: list[dict] = []
    step = 0
    for epoch in range(train_cfg.epochs):
        order = np.random.default_rng(
            np.random.SeedSequence(entropy=train_cfg.seed, spawn_key=(epoch,))
        ).permutation(len(prepared))
        for lo in range(0, len(prepared), train_cfg.effective_batch):
            if train_cfg.max_steps is not None and step >= train_cfg.max_steps:
                return state, rows
            batch = [prepared[i] for i in order[lo:lo + train_cfg.effective_batch]]
            for group in state.optimizer.param_groups:
                group["lr"] = _lr_at(train_cfg, step, total_steps)
            record = train_step(state, batch, epoch, step)
            rows.append(record)
            if on_step is not None:
                on_step(record)
            step += 1
    return state, rows


def rows_to_csv(rows: list[dict]) -> str:
    lines = [",".join(LOSS_CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in LOSS_CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)

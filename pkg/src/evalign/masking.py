"""Patch-level activity masks, the dilation curriculum, and token dropout.

The base mask marks tokens whose patch saw at least one event. During
training it is dilated outward on a schedule (Chebyshev dilation, one 3x3
max-pool sweep per radius unit), and a fixed fraction of input tokens is
dropped after a warmup epoch. The class token is never masked or dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from evalign.representation import OccupancyGrid


@dataclass
class PatchMask:
    """Binary G*G token mask; flat() gives the row-major length-G^2 view."""

    values: np.ndarray  # uint8, square

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, np.uint8)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError("patch mask must be a square 2D grid")

    @property
    def grid_size(self) -> int:
        return self.values.shape[0]

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def active_count(self) -> int:
        return int(self.values.sum())


@dataclass
class MaskSchedule:
    """Dilation radius as a function of training progress.

    Discrete mode maps epoch thresholds to radii (radius 0 before the first
    step). Linear mode grows the radius as floor(alpha * step) capped at
    sigma_max; its progress argument is the global step, not the epoch.
    """

    steps: dict[int, int] = field(default_factory=lambda: {10: 2, 15: 4, 20: 6})
    linear_alpha: float | None = None
    linear_sigma_max: int | None = None

    def __post_init__(self):
        radii = [self.steps[e] for e in sorted(self.steps)]
        if any(r < 0 for r in radii) or any(
            b < a for a, b in zip(radii, radii[1:])
        ):
            raise ValueError("schedule radii must be non-negative and non-decreasing")
        if (self.linear_alpha is None) != (self.linear_sigma_max is None):
            raise ValueError("linear schedule needs both alpha and sigma_max")

    @property
    def is_linear(self) -> bool:
        return self.linear_alpha is not None

    def radius_at(self, progress: int) -> int:
        if self.is_linear:
            return min(self.linear_sigma_max, int(np.floor(self.linear_alpha * progress)))
        radius = 0
        for epoch in sorted(self.steps):
            if progress >= epoch:
                radius = self.steps[epoch]
        return radius


@dataclass
class DropoutSpec:
    """Input-token dropout: fraction rho from start_epoch onward."""

    rho: float = 0.30
    start_epoch: int = 8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must be in [0, 1)")


def patch_activity_mask(occ: OccupancyGrid, patch: int) -> PatchMask:
    """Token j is active iff any occupied pixel lies in its patch.

    Grids whose sides are not divisible by patch are zero-padded at the
    bottom/right before pooling.
    """
    values = occ.values
    h, w = values.shape
    gh, gw = -(-h // patch), -(-w // patch)
    if gh * patch != h or gw * patch != w:
        padded = np.zeros((gh * patch, gw * patch), np.uint8)
        padded[:h, :w] = values
        values = padded
    pooled = values.reshape(gh, patch, gw, patch).max(axis=(1, 3))
    side = max(gh, gw)
    if gh != gw:
        square = np.zeros((side, side), np.uint8)
        square[:gh, :gw] = pooled
        pooled = square
    return PatchMask(values=pooled)


def dilate(mask: PatchMask, radius: int) -> PatchMask:
    """Chebyshev dilation: radius sweeps of 3x3 max-pooling, stride 1, pad 1."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    out = mask.values.copy()
    g = mask.grid_size
    for _ in range(radius):
        padded = np.zeros((g + 2, g + 2), np.uint8)
        padded[1:-1, 1:-1] = out
        stacked = np.stack(
            [padded[di:di + g, dj:dj + g] for di in range(3) for dj in range(3)]
        )
        out = stacked.max(axis=0)
    return PatchMask(values=out)


def mask_at_epoch(base: PatchMask, epoch: int, sched: MaskSchedule) -> PatchMask:
    """Base mask dilated by the schedule's radius at this progress point."""
    return dilate(base, sched.radius_at(epoch))


def sample_token_dropout(n_tokens: int, spec: DropoutSpec, epoch: int,
                         draw_index: int) -> np.ndarray:
    """Kept patch-token indices, sorted ascending.

    Before start_epoch every index is kept. From start_epoch on, exactly
    n_tokens - floor(rho * n_tokens) indices survive, drawn uniformly and
    reproducibly from (seed, epoch, draw_index).
    """
    all_idx = np.arange(n_tokens, dtype=np.int64)
    if epoch < spec.start_epoch or spec.rho == 0.0:
        return all_idx
    keep = n_tokens - int(np.floor(spec.rho * n_tokens))
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=spec.seed, spawn_key=(epoch, draw_index))
    )
    kept = rng.permutation(n_tokens)[:keep]
    kept.sort()
    return kept.astype(np.int64)

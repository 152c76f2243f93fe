"""Resolution adapters and temporal memory-hold for full-frame inference.

Inputs larger than the model tile are covered by four corner tiles whose
raw outputs are accumulated and normalized by a per-pixel coverage count;
smaller inputs are zero-padded symmetrically. Event-free windows replay
the most recent valid output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np

from evalign.errors import (
    InputLargerThanTarget,
    InputSmallerThanTile,
    ValidationError,
)
from evalign.events.windows import EventWindow


@dataclass
class TilePlan:
    """Corner placements of a T*T tile over an H*W input."""

    height: int
    width: int
    tile: int = 448
    origins: list[tuple[int, int]] = field(init=False)
    count_mask: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.height < self.tile or self.width < self.tile:
            raise InputSmallerThanTile(
                f"{self.height}x{self.width} input cannot host a {self.tile} tile"
            )
        if self.height > 2 * self.tile or self.width > 2 * self.tile:
            raise ValidationError(
                f"four corner tiles of {self.tile} cannot cover "
                f"{self.height}x{self.width}"
            )
        corners = {
            (0, 0),
            (0, self.width - self.tile),
            (self.height - self.tile, 0),
            (self.height - self.tile, self.width - self.tile),
        }
        self.origins = sorted(corners)
        self.count_mask = np.zeros((self.height, self.width), np.int64)
        for r, c in self.origins:
            self.count_mask[r:r + self.tile, c:c + self.tile] += 1


def tile_inference(values: np.ndarray, predictor: Callable[[np.ndarray], np.ndarray],
                   plan: TilePlan) -> np.ndarray:
    """Accumulate raw per-tile outputs at their origins, normalize by count.

    ``values`` is (..., H, W); the predictor maps a (..., T, T) tile to a
    (C, T, T) or (T, T) raw output (logits, not post-softmax values). Tiles
    are evaluated in origin order so the float accumulation is reproducible.
    """
    t = plan.tile
    out = None
    for r, c in plan.origins:
        tile = values[..., r:r + t, c:c + t]
        pred = np.asarray(predictor(tile), np.float64)
        if out is None:
            out = np.zeros(pred.shape[:-2] + (plan.height, plan.width), np.float64)
        out[..., r:r + t, c:c + t] += pred
    return out / plan.count_mask


@dataclass
class PadSpec:
    top: int
    bottom: int
    left: int
    right: int


def pad_symmetric(values: np.ndarray, target: int) -> tuple[np.ndarray, PadSpec]:
    """Zero-pad the trailing two axes to target*target, as evenly as possible.

    Odd residue goes to the bottom/right. Returns the padded array and the
    descriptor that makes unpad exact.
    """
    h, w = values.shape[-2:]
    if h > target or w > target:
        raise InputLargerThanTarget(f"{h}x{w} exceeds the {target} target")
    top = (target - h) // 2
    left = (target - w) // 2
    spec = PadSpec(top=top, bottom=target - h - top, left=left, right=target - w - left)
    pad = [(0, 0)] * (values.ndim - 2) + [(spec.top, spec.bottom), (spec.left, spec.right)]
    return np.pad(values, pad), spec


def unpad(values: np.ndarray, spec: PadSpec) -> np.ndarray:
    h, w = values.shape[-2:]
    return values[..., spec.top:h - spec.bottom, spec.left:w - spec.right]


class NoOutputYet:
    """Marker emitted for empty windows that precede any valid prediction."""

    def __repr__(self):
        return "NoOutputYet"


NO_OUTPUT_YET = NoOutputYet()


@dataclass
class HoldState:
    last_output: Any = None
    staleness: int = 0

    @property
    def has_output(self) -> bool:
        return self.last_output is not None


def memory_hold(windows: Iterable[EventWindow],
                predict: Callable[[EventWindow], Any],
                state: HoldState | None = None) -> list[tuple[Any, bool]]:
    """Predict on active windows; replay the last output on empty ones.

    Returns (output, held) pairs; held is False exactly when the window had
    events. Empty windows before any valid output yield NO_OUTPUT_YET.
    """
    state = state or HoldState()
    results = []
    for window in windows:
        if len(window) > 0:
            output = predict(window)
            state.last_output = output
            state.staleness = 0
            results.append((output, False))
        elif state.has_output:
            state.staleness += 1
            results.append((state.last_output, True))
        else:
            state.staleness += 1
            results.append((NO_OUTPUT_YET, True))
    return results


DEGENERATE_EIGENVALUE = 1e-12


def pca_feature_image(patches: np.ndarray) -> np.ndarray:
    """Project M = G^2 tokens onto their top-3 principal components.

    Each component becomes one channel, min-max scaled to [0, 1];
    rank-deficient directions (and all channels of constant inputs) are
    filled with 0.5.
    """
    patches = np.asarray(patches, np.float64)
    m, d = patches.shape
    g = int(round(m ** 0.5))
    if g * g != m:
        raise ValueError(f"token count {m} is not a square grid")
    centered = patches - patches.mean(axis=0)
    cov = centered.T @ centered / m
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:3]
    image = np.full((g, g, 3), 0.5)
    for channel, idx in enumerate(order):
        if eigvals[idx] <= DEGENERATE_EIGENVALUE:
            continue
        proj = centered @ eigvecs[:, idx]
        lo, hi = proj.min(), proj.max()
        if hi - lo <= 0:
            continue
        image[..., channel] = ((proj - lo) / (hi - lo)).reshape(g, g)
    return image

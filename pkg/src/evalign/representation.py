"""Voxel-grid encoding of event windows and the derived occupancy grid.

Events deposit signed polarity into a bins*H*W tensor with a temporal tent
kernel (the accumulation loop lives in ``evalign._kernels``). The occupancy
grid is computed from raw events, not from the signed grid, so opposite
polarities at one pixel cannot erase its footprint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from evalign import _kernels
from evalign.errors import BadMagic, DegenerateInput, TruncatedFile
from evalign.events.windows import EventWindow

VOXEL_MAGIC = b"RVXG"


@dataclass
class VoxelGrid:
    """Dense bins*height*width event tensor (float64, signed polarity)."""

    bins: int
    height: int
    width: int
    values: np.ndarray

    def __post_init__(self):
        assert self.values.shape == (self.bins, self.height, self.width)


@dataclass
class OccupancyGrid:
    """Binary height*width footprint: 1 where at least one event landed."""

    height: int
    width: int
    values: np.ndarray


def encode_voxel_grid(window: EventWindow, bins: int = 5, height: int = 448,
                      width: int = 448) -> VoxelGrid:
    """Accumulate a window into a voxel grid.

    t* = (bins - 1) * (t - t_start) / (t_end - t_start); an event deposits
    p * max(0, 1 - |b - t*|) into each bin b. Degenerate windows with
    t_end == t_start put everything in bin 0. Events outside the grid are
    skipped (cropped sensors).
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    span = int(window.t_end) - int(window.t_start)
    values = _kernels.accumulate_bilinear(
        window.t, window.x, window.y, window.p,
        int(window.t_start), int(window.t_start) + max(span, 0),
        bins, height, width,
    )
    return VoxelGrid(bins=bins, height=height, width=width, values=values)


def normalize_voxel_grid(grid: VoxelGrid) -> VoxelGrid:
    """Standardize the nonzero entries to zero mean, unit population std.

    Zero entries stay zero; an all-zero grid is returned unchanged; if the
    nonzero entries have zero variance they are mapped to 0.
    """
    values = grid.values
    nz = values != 0
    if not nz.any():
        return VoxelGrid(grid.bins, grid.height, grid.width, values.copy())
    sel = values[nz]
    mean = sel.mean()
    std = sel.std()  # population std: deterministic on tiny sets
    out = np.zeros_like(values)
    if std > 0:
        out[nz] = (sel - mean) / std
    return VoxelGrid(grid.bins, grid.height, grid.width, out)


def occupancy(window: EventWindow, height: int, width: int) -> OccupancyGrid:
    """Binary footprint of the window; counts events, not signed mass."""
    values = _kernels.occupancy_grid(window.x, window.y, height, width)
    return OccupancyGrid(height=height, width=width, values=values)


def center_crop_bounds(height: int, width: int) -> tuple[slice, slice]:
    """Row/col slices of the centered square (the larger axis is cropped)."""
    side = min(height, width)
    top = (height - side) // 2
    left = (width - side) // 2
    return slice(top, top + side), slice(left, left + side)


def resize_center_crop(grid: VoxelGrid, target: int) -> VoxelGrid:
    """Center-crop to a square, then bilinearly resize each bin to target^2."""
    if target < 1:
        raise ValueError("target must be >= 1")
    if grid.height == 0 or grid.width == 0:
        raise DegenerateInput("cannot crop/resize an empty grid")
    rows, cols = center_crop_bounds(grid.height, grid.width)
    square = grid.values[:, rows, cols]
    side = square.shape[-1]
    if side == target:
        out = square.copy()
    else:
        out = np.stack([_bilinear_resize(square[b], target) for b in range(grid.bins)])
    return VoxelGrid(bins=grid.bins, height=target, width=target, values=out)


def _bilinear_resize(img: np.ndarray, target: int) -> np.ndarray:
    # half-pixel-center convention; a + f*(b - a) keeps constants exact
    src = img.shape[0]
    coords = (np.arange(target) + 0.5) * (src / target) - 0.5
    coords = np.clip(coords, 0.0, src - 1.0)
    lo = np.floor(coords).astype(np.int64)
    hi = np.minimum(lo + 1, src - 1)
    frac = coords - lo

    rows = img[lo, :] + frac[:, None] * (img[hi, :] - img[lo, :])
    return rows[:, lo] + frac[None, :] * (rows[:, hi] - rows[:, lo])


def collapse_absolute(grid: VoxelGrid) -> np.ndarray:
    """Temporal collapse of |values|; nonzero wherever signed mass survives."""
    return np.abs(grid.values).sum(axis=0)


def write_voxel_grid(grid: VoxelGrid) -> bytes:
    header = (
        VOXEL_MAGIC
        + np.uint16(grid.bins).tobytes()
        + np.uint16(grid.height).tobytes()
        + np.uint16(grid.width).tobytes()
    )
    return header + grid.values.astype("<f4").tobytes()


def read_voxel_grid(data: bytes) -> VoxelGrid:
    if len(data) < 10 or data[:4] != VOXEL_MAGIC:
        raise BadMagic("not a voxel-grid file")
    bins = int(np.frombuffer(data, "<u2", 1, 4)[0])
    height = int(np.frombuffer(data, "<u2", 1, 6)[0])
    width = int(np.frombuffer(data, "<u2", 1, 8)[0])
    count = bins * height * width
    if len(data) < 10 + 4 * count:
        raise TruncatedFile("voxel payload shorter than header declares")
    values = np.frombuffer(data, "<f4", count, 10).astype(np.float64)
    return VoxelGrid(bins, height, width, values.reshape(bins, height, width))

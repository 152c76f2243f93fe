"""Synthetic paired scenes: moving shapes rendered to intensity frames,
with events generated by per-pixel log-intensity threshold crossings.

Each sample carries the proxy image the teacher sees, the event window the
student sees, the patch activity mask derived from the events, and (for
head training) per-pixel class labels and depth in meters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from evalign.events.windows import EventWindow
from evalign.masking import PatchMask, patch_activity_mask
from evalign.representation import occupancy

LOG_EPS = 1e-3


@dataclass
class SceneSpec:
    height: int = 112
    width: int = 112
    patch: int = 14
    subframes: int = 12
    duration_us: int = 33_000
    contrast: float = 0.15          # log-intensity threshold per event
    n_shapes: tuple[int, int] = (1, 3)
    size_range: tuple[float, float] = (0.06, 0.16)  # fraction of the short side
    background: float = 0.30
    background_depth: float = 50.0  # meters
    depth_range: tuple[float, float] = (2.0, 30.0)
    speed_range: tuple[float, float] = (8.0, 28.0)  # pixels over the window
    classes: int = 4                # 0 = background


@dataclass
class Shape:
    kind: str          # "rect" | "disc"
    cx: float
    cy: float
    size: float
    vx: float
    vy: float
    intensity: float
    class_id: int
    depth: float


@dataclass
class PairedSample:
    """One teacher/student training pair plus dense labels for the heads."""

    proxy_image: np.ndarray        # (1, H, W) float32 in [0, 1]
    window: EventWindow
    base_mask: PatchMask
    seg_labels: np.ndarray         # (H, W) uint8, 0 = background
    depth: np.ndarray              # (H, W) float32 meters
    occupancy: np.ndarray = field(repr=False, default=None)

    @property
    def skippable(self) -> bool:
        return self.base_mask.active_count() == 0


def _paint(spec: SceneSpec, shapes: list[Shape], progress: float):
    """Intensity, class, and depth rasters at a motion fraction in [0, 1]."""
    img = np.full((spec.height, spec.width), spec.background, np.float64)
    labels = np.zeros((spec.height, spec.width), np.uint8)
    depth = np.full((spec.height, spec.width), spec.background_depth, np.float32)
    ys, xs = np.mgrid[0:spec.height, 0:spec.width]
    for shape in shapes:
        cx = shape.cx + shape.vx * progress
        cy = shape.cy + shape.vy * progress
        if shape.kind == "rect":
            inside = (np.abs(xs - cx) <= shape.size) & (np.abs(ys - cy) <= shape.size)
        else:
            inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= shape.size ** 2
        img[inside] = shape.intensity
        labels[inside] = shape.class_id
        depth[inside] = shape.depth
    return img, labels, depth


def _events_from_frames(frames: list[np.ndarray], spec: SceneSpec) -> EventWindow:
    """Per-pixel reference-crossing event generation between sub-frames."""
    h, w = frames[0].shape
    ref = np.log(frames[0] + LOG_EPS)
    step_us = spec.duration_us / (len(frames) - 1)
    ts, xs, ys, ps = [], [], [], []
    for k in range(1, len(frames)):
        logi = np.log(frames[k] + LOG_EPS)
        delta = logi - ref
        crossings = np.floor(np.abs(delta) / spec.contrast).astype(np.int64)
        active = crossings > 0
        if active.any():
            yy, xx = np.nonzero(active)
            counts = crossings[yy, xx]
            sign = np.sign(delta[yy, xx]).astype(np.int8)
            rep_x = np.repeat(xx, counts)
            rep_y = np.repeat(yy, counts)
            rep_p = np.repeat(sign, counts)
            # evenly spaced inside the sub-frame interval, per crossing
            order = np.concatenate([np.arange(1, c + 1) for c in counts])
            frac = order / (np.repeat(counts, counts) + 1.0)
            rep_t = ((k - 1 + frac) * step_us).astype(np.uint64)
            ts.append(rep_t)
            xs.append(rep_x)
            ys.append(rep_y)
            ps.append(rep_p)
            ref[yy, xx] += counts * spec.contrast * np.sign(delta[yy, xx])
    if ts:
        t = np.concatenate(ts)
        x = np.concatenate(xs).astype(np.uint16)
        y = np.concatenate(ys).astype(np.uint16)
        p = np.concatenate(ps).astype(np.int8)
        order = np.argsort(t, kind="stable")
        t, x, y, p = t[order], x[order], y[order], p[order]
    else:
        t = np.empty(0, np.uint64)
        x = np.empty(0, np.uint16)
        y = np.empty(0, np.uint16)
        p = np.empty(0, np.int8)
    return EventWindow(t_start=0, t_end=spec.duration_us, t=t, x=x, y=y, p=p)


def _random_shapes(rng: np.random.Generator, spec: SceneSpec) -> list[Shape]:
    n = int(rng.integers(spec.n_shapes[0], spec.n_shapes[1] + 1))
    shapes = []
    for _ in range(n):
        speed = rng.uniform(*spec.speed_range)
        angle = rng.uniform(0, 2 * np.pi)
        shapes.append(
            Shape(
                kind=str(rng.choice(["rect", "disc"])),
                cx=float(rng.uniform(0.2, 0.8) * spec.width),
                cy=float(rng.uniform(0.2, 0.8) * spec.height),
                size=float(rng.uniform(*spec.size_range) * min(spec.height, spec.width)),
                vx=float(np.cos(angle) * speed),
                vy=float(np.sin(angle) * speed),
                intensity=float(rng.uniform(0.55, 0.95)),
                class_id=int(rng.integers(1, spec.classes)),
                depth=float(rng.uniform(*spec.depth_range)),
            )
        )
    return shapes


def render_sample(shapes: list[Shape], spec: SceneSpec) -> PairedSample:
    frames, labels, depth = [], None, None
    for k in range(spec.subframes + 1):
        img, labels, depth = _paint(spec, shapes, k / spec.subframes)
        frames.append(img)
    window = _events_from_frames(frames, spec)
    occ = occupancy(window, spec.height, spec.width)
    return PairedSample(
        proxy_image=frames[-1][None].astype(np.float32),
        window=window,
        base_mask=patch_activity_mask(occ, spec.patch),
        seg_labels=labels,
        depth=depth,
        occupancy=occ.values,
    )


def synth_paired_dataset(seed: int, n: int, spec: SceneSpec | None = None) -> list[PairedSample]:
    """n deterministic samples; sample i depends only on (seed, i, spec)."""
    spec = spec or SceneSpec()
    samples = []
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        samples.append(render_sample(_random_shapes(rng, spec), spec))
    return samples

"""Temporal windowing of event streams.

Two modes: fixed event count (trailing remainder discarded) and fixed time
bins anchored at the first event's timestamp (empty bins are emitted so the
downstream memory-hold stage sees sensor-quiet intervals). A stride of k
keeps every k-th window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from evalign.events.io import EventStream


@dataclass
class EventWindow:
    """A temporally bounded slice of an EventStream."""

    t_start: int
    t_end: int
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    @property
    def empty(self) -> bool:
        return len(self.t) == 0


@dataclass
class WindowSpec:
    """Windowing mode: ``count`` with n events or ``time`` with a bin width."""

    mode: str  # "count" | "time"
    n: int = 0
    dt_us: int = 0
    stride: int = 1

    def __post_init__(self):
        if self.mode not in ("count", "time"):
            raise ValueError(f"unknown window mode {self.mode!r}")
        if self.mode == "count" and self.n < 1:
            raise ValueError("fixed-count windows need n >= 1")
        if self.mode == "time" and self.dt_us < 1:
            raise ValueError("fixed-time windows need dt_us >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    def apply(self, stream: EventStream) -> list[EventWindow]:
        if self.mode == "count":
            return window_fixed_count(stream, self.n, self.stride)
        return window_fixed_time(stream, self.dt_us, self.stride)


def _slice(stream: EventStream, lo: int, hi: int) -> tuple:
    return (stream.t[lo:hi], stream.x[lo:hi], stream.y[lo:hi], stream.p[lo:hi])


def window_fixed_count(stream: EventStream, n: int, stride: int = 1) -> list[EventWindow]:
    """Consecutive non-overlapping n-event windows; every stride-th emitted.

    Window bounds are the first and last event timestamps. A trailing
    remainder shorter than n is discarded.
    """
    if n < 1 or stride < 1:
        raise ValueError("n and stride must be >= 1")
    total = len(stream) // n
    windows = []
    for k in range(0, total, stride):
        lo, hi = k * n, (k + 1) * n
        t, x, y, p = _slice(stream, lo, hi)
        windows.append(
            EventWindow(t_start=int(t[0]), t_end=int(t[-1]), t=t, x=x, y=y, p=p)
        )
    return windows


def window_fixed_time(stream: EventStream, dt_us: int, stride: int = 1) -> list[EventWindow]:
    """Half-open bins [t0 + k*dt, t0 + (k+1)*dt) anchored at the first event.

    Bins run through the one containing the last event, so every event is
    covered; interior bins without events are emitted as empty windows.
    """
    if dt_us < 1 or stride < 1:
        raise ValueError("dt_us and stride must be >= 1")
    if len(stream) == 0:
        return []
    t0 = int(stream.t[0])
    last_bin = int((int(stream.t[-1]) - t0) // dt_us)
    # searchsorted on the bin edges gives each window's [lo, hi) event span
    edges = t0 + dt_us * np.arange(last_bin + 2, dtype=np.uint64)
    bounds = np.searchsorted(stream.t, edges, side="left")
    windows = []
    for k in range(0, last_bin + 1, stride):
        lo, hi = int(bounds[k]), int(bounds[k + 1])
        t, x, y, p = _slice(stream, lo, hi)
        windows.append(
            EventWindow(
                t_start=t0 + k * dt_us,
                t_end=t0 + (k + 1) * dt_us,
                t=t,
                x=x,
                y=y,
                p=p,
            )
        )
    return windows

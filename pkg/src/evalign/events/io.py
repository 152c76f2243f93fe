"""Event stream parsing, validation, and serialization.

Binary container (little-endian):
    magic ``REVT`` | u16 width | u16 height | u64 count |
    count * { u64 t_us, u16 x, u16 y, i8 p, u8 pad }

CSV fallback: header ``t_us,x,y,p``, one event per line.

Streams are stored column-wise as numpy arrays; events must be sorted by
timestamp (ties keep file order) with pixels inside the sensor bounds and
polarity in {-1, +1}.
"""

from __future__ import annotations

import io as _io
from dataclasses import dataclass, field

import numpy as np

from evalign.errors import (
    BadMagic,
    BadPolarity,
    NonMonotoneTimestamp,
    OutOfBoundsPixel,
    TruncatedFile,
)

MAGIC = b"REVT"
HEADER_SIZE = 4 + 2 + 2 + 8
RECORD_DTYPE = np.dtype(
    [("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1"), ("pad", "u1")]
)
CSV_HEADER = "t_us,x,y,p"


@dataclass(frozen=True)
class Event:
    """A single brightness-change event."""

    t: int  # microseconds
    x: int
    y: int
    p: int  # polarity, -1 or +1


@dataclass
class EventStream:
    """Column-wise store of a time-sorted event sequence."""

    sensor_width: int
    sensor_height: int
    t: np.ndarray = field(default_factory=lambda: np.empty(0, np.uint64))
    x: np.ndarray = field(default_factory=lambda: np.empty(0, np.uint16))
    y: np.ndarray = field(default_factory=lambda: np.empty(0, np.uint16))
    p: np.ndarray = field(default_factory=lambda: np.empty(0, np.int8))

    def __post_init__(self):
        self.t = np.ascontiguousarray(self.t, np.uint64)
        self.x = np.ascontiguousarray(self.x, np.uint16)
        self.y = np.ascontiguousarray(self.y, np.uint16)
        self.p = np.ascontiguousarray(self.p, np.int8)
        validate_columns(
            self.t, self.x, self.y, self.p, self.sensor_width, self.sensor_height
        )

    def __len__(self) -> int:
        return len(self.t)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.sensor_width == other.sensor_width
            and self.sensor_height == other.sensor_height
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )

    @classmethod
    def from_events(cls, width: int, height: int, events: list[Event]) -> "EventStream":
        return cls(
            sensor_width=width,
            sensor_height=height,
            t=np.array([e.t for e in events], np.uint64),
            x=np.array([e.x for e in events], np.uint16),
            y=np.array([e.y for e in events], np.uint16),
            p=np.array([e.p for e in events], np.int8),
        )


def validate_columns(t, x, y, p, width: int, height: int) -> None:
    n = len(t)
    if not (len(x) == len(y) == len(p) == n):
        raise TruncatedFile("event columns have mismatched lengths")
    if n == 0:
        return
    if np.any(t[1:] < t[:-1]):
        bad = int(np.argmax(t[1:] < t[:-1])) + 1
        raise NonMonotoneTimestamp(f"timestamp decreases at record {bad}")
    if np.any(x >= width) or np.any(y >= height):
        raise OutOfBoundsPixel(
            f"event pixel outside {width}x{height} sensor bounds"
        )
    if np.any((p != 1) & (p != -1)):
        raise BadPolarity("polarity values must be -1 or +1")


def parse_events(data: bytes) -> EventStream:
    """Parse the binary format, falling back to CSV for text payloads."""
    if len(data) >= 4 and data[:4] == MAGIC:
        return _parse_binary(data)
    if _looks_like_csv(data):
        return _parse_csv(data)
    raise BadMagic("not a REVT file (bad magic) and not the CSV fallback")


def _parse_binary(data: bytes) -> EventStream:
    if len(data) < HEADER_SIZE:
        raise TruncatedFile(f"header needs {HEADER_SIZE} bytes, got {len(data)}")
    width = int(np.frombuffer(data, "<u2", 1, 4)[0])
    height = int(np.frombuffer(data, "<u2", 1, 6)[0])
    count = int(np.frombuffer(data, "<u8", 1, 8)[0])
    expected = HEADER_SIZE + count * RECORD_DTYPE.itemsize
    if len(data) < expected:
        raise TruncatedFile(
            f"header declares {count} records ({expected} bytes), file has {len(data)}"
        )
    records = np.frombuffer(data, RECORD_DTYPE, count, HEADER_SIZE)
    return EventStream(
        sensor_width=width,
        sensor_height=height,
        t=records["t"].copy(),
        x=records["x"].copy(),
        y=records["y"].copy(),
        p=records["p"].copy(),
    )


def _looks_like_csv(data: bytes) -> bool:
    try:
        head = data[:256].decode("utf-8")
    except UnicodeDecodeError:
        return False
    return head.splitlines()[0].strip() == CSV_HEADER if head else False


def _parse_csv(data: bytes) -> EventStream:
    text = data.decode("utf-8")
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise BadMagic(f"CSV fallback requires header '{CSV_HEADER}'")
    body = lines[1:]
    if body:
        table = np.loadtxt(
            _io.StringIO("\n".join(body)), dtype=np.int64, delimiter=",", ndmin=2
        )
    else:
        table = np.empty((0, 4), np.int64)
    if table.shape[1] != 4:
        raise TruncatedFile("CSV rows must have 4 columns: t_us,x,y,p")
    # CSV carries no sensor geometry; infer the tightest bounds.
    width = int(table[:, 1].max()) + 1 if len(table) else 1
    height = int(table[:, 2].max()) + 1 if len(table) else 1
    return EventStream(
        sensor_width=width,
        sensor_height=height,
        t=table[:, 0].astype(np.uint64),
        x=table[:, 1].astype(np.uint16),
        y=table[:, 2].astype(np.uint16),
        p=table[:, 3].astype(np.int8),
    )


def write_events(stream: EventStream) -> bytes:
    """Serialize to the binary container; parse_events inverts bit-exactly."""
    records = np.zeros(len(stream), RECORD_DTYPE)
    records["t"] = stream.t
    records["x"] = stream.x
    records["y"] = stream.y
    records["p"] = stream.p
    header = (
        MAGIC
        + np.uint16(stream.sensor_width).tobytes()
        + np.uint16(stream.sensor_height).tobytes()
        + np.uint64(len(stream)).tobytes()
    )
    return header + records.tobytes()


def write_events_csv(stream: EventStream) -> bytes:
    rows = [CSV_HEADER]
    for t, x, y, p in zip(stream.t, stream.x, stream.y, stream.p):
        rows.append(f"{int(t)},{int(x)},{int(y)},{int(p)}")
    return ("\n".join(rows) + "\n").encode("utf-8")

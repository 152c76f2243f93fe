import numpy as np
import pytest

from evalign.errors import (
    BadMagic,
    BadPolarity,
    NonMonotoneTimestamp,
    OutOfBoundsPixel,
    TruncatedFile,
)
from evalign.events import (
    Event,
    EventStream,
    parse_events,
    window_fixed_count,
    window_fixed_time,
    write_events,
    write_events_csv,
)


def make_stream(ts, width=64, height=48, xs=None, ys=None, ps=None):
    n = len(ts)
    return EventStream(
        sensor_width=width,
        sensor_height=height,
        t=np.asarray(ts, np.uint64),
        x=np.asarray(xs if xs is not None else np.arange(n) % width, np.uint16),
        y=np.asarray(ys if ys is not None else np.arange(n) % height, np.uint16),
        p=np.asarray(ps if ps is not None else [1, -1] * (n // 2) + [1] * (n % 2), np.int8),
    )


class TestParse:
    def test_empty_stream_header_only(self):
        header = b"REVT" + np.uint16(4).tobytes() + np.uint16(4).tobytes() + np.uint64(0).tobytes()
        stream = parse_events(header)
        assert len(stream) == 0
        assert stream.sensor_width == 4
        assert stream.sensor_height == 4

    def test_truncated_record_count(self):
        stream = make_stream([1, 2], width=8, height=8, xs=[0, 1], ys=[0, 1], ps=[1, -1])
        data = write_events(stream)
        # header says 2 records, drop the last one
        with pytest.raises(TruncatedFile):
            parse_events(data[:-14])

    def test_round_trip_hand_written(self):
        # byte-level round-trip oracle on three hand-written records
        stream = EventStream.from_events(
            16, 12,
            [Event(t=10, x=3, y=2, p=1), Event(t=11, x=0, y=0, p=-1), Event(t=11, x=15, y=11, p=1)],
        )
        assert parse_events(write_events(stream)) == stream

    def test_round_trip_random(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = int(rng.integers(0, 200))
            stream = EventStream(
                sensor_width=640, sensor_height=480,
                t=np.sort(rng.integers(0, 10**7, n).astype(np.uint64)),
                x=rng.integers(0, 640, n).astype(np.uint16),
                y=rng.integers(0, 480, n).astype(np.uint16),
                p=rng.choice([-1, 1], n).astype(np.int8),
            )
            assert parse_events(write_events(stream)) == stream

    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            parse_events(b"\x00\x01\x02\x03garbagegarbagegarbage")

    def test_out_of_bounds_pixel(self):
        stream = make_stream([1], width=8, height=8, xs=[3], ys=[3], ps=[1])
        data = bytearray(write_events(stream))
        data[4:6] = np.uint16(2).tobytes()  # shrink declared width below x=3
        with pytest.raises(OutOfBoundsPixel):
            parse_events(bytes(data))

    def test_non_monotone_timestamp(self):
        stream = make_stream([5, 6], width=8, height=8, xs=[0, 1], ys=[0, 1], ps=[1, 1])
        data = bytearray(write_events(stream))
        data[16:24] = np.uint64(9).tobytes()  # first record now later than second
        with pytest.raises(NonMonotoneTimestamp):
            parse_events(bytes(data))

    def test_bad_polarity(self):
        stream = make_stream([5], width=8, height=8, xs=[0], ys=[0], ps=[1])
        data = bytearray(write_events(stream))
        data[28] = 3  # polarity byte of the only record
        with pytest.raises(BadPolarity):
            parse_events(bytes(data))

    def test_csv_fallback_round_trip(self):
        stream = make_stream([1, 2, 9], width=3, height=3, xs=[0, 1, 2], ys=[2, 1, 0], ps=[1, -1, 1])
        parsed = parse_events(write_events_csv(stream))
        assert np.array_equal(parsed.t, stream.t)
        assert np.array_equal(parsed.x, stream.x)
        assert np.array_equal(parsed.y, stream.y)
        assert np.array_equal(parsed.p, stream.p)

    def test_ties_keep_order(self):
        stream = make_stream([5, 5, 5], width=8, height=8, xs=[2, 1, 0], ys=[0, 0, 0], ps=[1, 1, 1])
        parsed = parse_events(write_events(stream))
        assert list(parsed.x) == [2, 1, 0]


class TestFixedCount:
    def test_ten_events_n3(self):
        windows = window_fixed_count(make_stream(range(10)), n=3, stride=1)
        assert len(windows) == 3
        assert all(len(w) == 3 for w in windows)

    def test_stride_two(self):
        windows = window_fixed_count(make_stream(range(10)), n=3, stride=2)
        assert len(windows) == 2
        assert list(windows[0].t) == [0, 1, 2]
        assert list(windows[1].t) == [6, 7, 8]

    def test_count_threshold_single_window(self):
        n = 150_000
        stream = make_stream(np.arange(n))
        windows = window_fixed_count(stream, n=n, stride=1)
        assert len(windows) == 1
        assert len(windows[0]) == n

    def test_empty_stream(self):
        assert window_fixed_count(make_stream([]), n=3, stride=1) == []

    def test_bounds_are_first_last_timestamps(self):
        windows = window_fixed_count(make_stream([3, 5, 9, 12]), n=4, stride=1)
        assert windows[0].t_start == 3 and windows[0].t_end == 12

    def test_concat_reproduces_prefix(self):
        stream = make_stream(np.sort(np.random.default_rng(1).integers(0, 1000, 50)))
        windows = window_fixed_count(stream, n=7, stride=1)
        concat = np.concatenate([w.t for w in windows])
        assert np.array_equal(concat, stream.t[: len(concat)])


def brute_force_time_bins(ts, dt):
    """Oracle: assign each event to its bin; emit bins through the last one."""
    if len(ts) == 0:
        return []
    t0 = int(ts[0])
    bins = [int((int(t) - t0) // dt) for t in ts]
    out = [[] for _ in range(max(bins) + 1)]
    for t, b in zip(ts, bins):
        out[b].append(int(t))
    return out


class TestFixedTime:
    def test_forced_binning(self):
        windows = window_fixed_time(make_stream([0, 10, 40]), dt_us=33, stride=1)
        assert len(windows) == 2
        assert list(windows[0].t) == [0, 10]
        assert list(windows[1].t) == [40]

    def test_empty_bins_emitted(self):
        windows = window_fixed_time(make_stream([0, 100]), dt_us=33, stride=1)
        assert len(windows) == 4
        assert windows[1].empty and windows[2].empty
        assert not windows[0].empty and not windows[3].empty

    def test_one_second_stream_thirty_windows(self):
        # activity covers [0, 989ms] of a 1 s capture; oracle says 30 bins
        ts = np.arange(0, 990_000, 1000)
        oracle = brute_force_time_bins(ts, 33_000)
        assert len(oracle) == 30
        windows = window_fixed_time(make_stream(ts), dt_us=33_000, stride=1)
        assert len(windows) == len(oracle)
        for w, expected in zip(windows, oracle):
            assert list(map(int, w.t)) == expected

    def test_matches_oracle_random(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            ts = np.sort(rng.integers(0, 5000, int(rng.integers(1, 80))))
            dt = int(rng.integers(1, 700))
            oracle = brute_force_time_bins(ts, dt)
            windows = window_fixed_time(make_stream(ts), dt_us=dt, stride=1)
            assert len(windows) == len(oracle)
            for w, expected in zip(windows, oracle):
                assert list(map(int, w.t)) == expected

    def test_stride_on_bin_index(self):
        windows = window_fixed_time(make_stream([0, 100]), dt_us=33, stride=2)
        assert len(windows) == 2  # bins 0 and 2
        assert windows[0].t_start == 0 and windows[1].t_start == 66

    def test_every_event_in_exactly_one_window(self):
        rng = np.random.default_rng(9)
        ts = np.sort(rng.integers(0, 2000, 60))
        windows = window_fixed_time(make_stream(ts), dt_us=50, stride=1)
        collected = np.concatenate([w.t for w in windows])
        assert np.array_equal(np.sort(collected), np.sort(ts))

    def test_empty_stream(self):
        assert window_fixed_time(make_stream([]), dt_us=33, stride=1) == []

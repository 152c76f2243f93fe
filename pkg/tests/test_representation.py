import numpy as np
import pytest

from evalign import _kernels
from evalign.errors import DegenerateInput
from evalign.events.windows import EventWindow
from evalign.representation import (
    VoxelGrid,
    center_crop_bounds,
    collapse_absolute,
    encode_voxel_grid,
    normalize_voxel_grid,
    occupancy,
    read_voxel_grid,
    resize_center_crop,
    write_voxel_grid,
)


def window(ts, xs, ys, ps, t_start=None, t_end=None):
    ts = np.asarray(ts, np.uint64)
    if t_start is None:
        t_start = int(ts[0]) if len(ts) else 0
    if t_end is None:
        t_end = int(ts[-1]) if len(ts) else 0
    return EventWindow(
        t_start=t_start, t_end=t_end,
        t=ts, x=np.asarray(xs, np.uint16),
        y=np.asarray(ys, np.uint16), p=np.asarray(ps, np.int8),
    )


def random_window(rng, height=32, width=40, n=None):
    n = int(rng.integers(1, 400)) if n is None else n
    ts = np.sort(rng.integers(0, 10_000, n).astype(np.uint64))
    return window(
        ts,
        rng.integers(0, width, n),
        rng.integers(0, height, n),
        rng.choice([-1, 1], n),
    )


class TestEncode:
    def test_event_at_start_lands_in_bin_zero(self):
        grid = encode_voxel_grid(window([100, 200], [3, 9], [2, 7], [1, 1]), 5, 16, 16)
        assert grid.values[0, 2, 3] == 1.0
        assert grid.values[:, 2, 3].sum() == 1.0

    def test_half_bin_split(self):
        # t* = 1.5 with B=5 over [0, 8]: t = 3 gives t* = 4*3/8 = 1.5
        grid = encode_voxel_grid(window([0, 3, 8], [0, 5, 1], [0, 5, 1], [1, 1, 1]), 5, 8, 8)
        assert grid.values[1, 5, 5] == 0.5
        assert grid.values[2, 5, 5] == 0.5

    def test_polarity_cancellation(self):
        grid = encode_voxel_grid(window([5, 5], [2, 2], [3, 3], [1, -1]), 5, 8, 8)
        assert np.all(grid.values == 0.0)

    def test_empty_window_all_zero(self):
        grid = encode_voxel_grid(window([], [], [], []), 5, 8, 8)
        assert grid.values.shape == (5, 8, 8)
        assert np.all(grid.values == 0.0)

    def test_single_timestamp_window_bin_zero(self):
        grid = encode_voxel_grid(window([7, 7], [1, 2], [1, 2], [1, 1]), 5, 8, 8)
        assert grid.values[0].sum() == 2.0
        assert grid.values[1:].sum() == 0.0

    def test_out_of_bounds_events_skipped(self):
        grid = encode_voxel_grid(window([0, 1], [2, 30], [2, 30], [1, 1]), 5, 8, 8)
        assert grid.values.sum() == 1.0

    def test_mass_conservation_randomized(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            w = random_window(rng)
            grid = encode_voxel_grid(w, 5, 32, 40)
            expected = w.p.astype(np.int64).sum()
            total = grid.values.sum()
            assert abs(total - expected) <= 1e-6 * max(1.0, abs(expected))

    def test_partition_of_unity_exact(self):
        # every interior event deposits total |mass| exactly 1
        rng = np.random.default_rng(5)
        for _ in range(50):
            t = int(rng.integers(0, 1000))
            w = window([0, t, 1000], [1, 2, 3], [1, 2, 3], [1, 1, 1])
            grid = encode_voxel_grid(w, 5, 8, 8)
            assert grid.values[:, 2, 2].sum() == 1.0


class TestNormalize:
    def test_all_zero_unchanged(self):
        grid = VoxelGrid(2, 4, 4, np.zeros((2, 4, 4)))
        out = normalize_voxel_grid(grid)
        assert np.all(out.values == 0.0)

    def test_two_values_standardized(self):
        values = np.zeros((1, 2, 2))
        values[0, 0, 0] = 1.0
        values[0, 1, 1] = 3.0
        out = normalize_voxel_grid(VoxelGrid(1, 2, 2, values))
        assert out.values[0, 0, 0] == -1.0
        assert out.values[0, 1, 1] == 1.0
        assert out.values[0, 0, 1] == 0.0

    def test_constant_nonzero_maps_to_zero(self):
        values = np.zeros((1, 2, 2))
        values[0, 0, :] = 5.0
        out = normalize_voxel_grid(VoxelGrid(1, 2, 2, values))
        assert np.all(out.values == 0.0)

    def test_idempotent_when_nonzero_set_stable(self):
        rng = np.random.default_rng(2)
        values = rng.normal(size=(3, 8, 8)) * (rng.random((3, 8, 8)) < 0.4)
        once = normalize_voxel_grid(VoxelGrid(3, 8, 8, values))
        twice = normalize_voxel_grid(once)
        assert np.allclose(once.values, twice.values, atol=1e-6)


class TestOccupancy:
    def test_single_event(self):
        occ = occupancy(window([0], [7], [3], [1]), 8, 8)
        assert occ.values[3, 7] == 1
        assert occ.values.sum() == 1

    def test_cancellation_still_active(self):
        w = window([5, 5], [2, 2], [3, 3], [1, -1])
        occ = occupancy(w, 8, 8)
        assert occ.values[3, 2] == 1
        # while the signed voxel grid is empty there
        assert collapse_absolute(encode_voxel_grid(w, 5, 8, 8))[3, 2] == 0.0

    def test_empty_window(self):
        assert occupancy(window([], [], [], []), 8, 8).values.sum() == 0

    def test_occupancy_dominates_voxel_footprint(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            w = random_window(rng)
            occ = occupancy(w, 32, 40).values
            voxel_footprint = collapse_absolute(encode_voxel_grid(w, 5, 32, 40)) > 0
            assert np.all(occ.astype(bool) | ~voxel_footprint)


class TestResizeCenterCrop:
    def test_identity(self):
        rng = np.random.default_rng(0)
        grid = VoxelGrid(2, 16, 16, rng.normal(size=(2, 16, 16)))
        out = resize_center_crop(grid, 16)
        assert np.array_equal(out.values, grid.values)

    def test_coverage_enumeration_480x640(self):
        # oracle: enumerate source pixels inside the centered square
        rows, cols = center_crop_bounds(480, 640)
        in_crop = np.zeros((480, 640), bool)
        in_crop[rows, cols] = True
        for y in range(480):
            for x in range(0, 640, 7):
                assert in_crop[y, x] == (80 <= x < 560)
        # pixels outside the crop cannot influence the output
        base = np.zeros((1, 480, 640))
        spiked = base.copy()
        spiked[0, 240, 10] = 100.0  # discarded corner of the wide axis
        out_a = resize_center_crop(VoxelGrid(1, 480, 640, base), 448)
        out_b = resize_center_crop(VoxelGrid(1, 480, 640, spiked), 448)
        assert np.array_equal(out_a.values, out_b.values)
        spiked[0, 240, 320] = 100.0  # center pixel survives
        out_c = resize_center_crop(VoxelGrid(1, 480, 640, spiked), 448)
        assert not np.array_equal(out_a.values, out_c.values)

    def test_constant_preserved(self):
        grid = VoxelGrid(3, 30, 20, np.full((3, 30, 20), 2.5))
        out = resize_center_crop(grid, 13)
        assert out.values.shape == (3, 13, 13)
        assert np.all(out.values == 2.5)

    def test_degenerate_input(self):
        with pytest.raises(DegenerateInput):
            resize_center_crop(VoxelGrid(1, 0, 4, np.zeros((1, 0, 4))), 8)


class TestSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(4)
        grid = VoxelGrid(5, 6, 7, rng.normal(size=(5, 6, 7)).astype(np.float32).astype(np.float64))
        back = read_voxel_grid(write_voxel_grid(grid))
        assert back.bins == 5 and back.height == 6 and back.width == 7
        assert np.array_equal(back.values, grid.values)


class TestKernelBackends:
    def test_fallback_selected_without_compiled(self):
        # blocking the extension import must leave a working numpy backend
        import subprocess
        import sys

        code = (
            "import sys\n"
            "sys.modules['evalign._kernels._voxel_cy'] = None\n"
            "import numpy as np\n"
            "import evalign._kernels as k\n"
            "assert not k.HAVE_COMPILED\n"
            "g = k.accumulate_bilinear(np.array([0], np.uint64),"
            " np.array([1], np.uint16), np.array([1], np.uint16),"
            " np.array([1], np.int8), 0, 10, 5, 4, 4)\n"
            "assert g[0, 1, 1] == 1.0\n"
            "print('fallback ok')\n"
        )
        result = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True
        )
        assert result.returncode == 0, result.stderr
        assert "fallback ok" in result.stdout

    def test_backends_bit_identical(self):
        impls = _kernels.implementations()
        if len(impls) < 2:
            pytest.skip("compiled kernels unavailable")
        rng = np.random.default_rng(21)
        for _ in range(10):
            n = int(rng.integers(1, 5000))
            t = np.sort(rng.integers(0, 100000, n).astype(np.uint64))
            x = rng.integers(0, 64, n).astype(np.uint16)
            y = rng.integers(0, 48, n).astype(np.uint16)
            p = rng.choice([-1, 1], n).astype(np.int8)
            grids = [
                impl.accumulate_bilinear(t, x, y, p, int(t[0]), int(t[-1]), 5, 48, 64)
                for impl in impls.values()
            ]
            assert np.array_equal(grids[0], grids[1])
            occs = [impl.occupancy_grid(x, y, 48, 64) for impl in impls.values()]
            assert np.array_equal(occs[0], occs[1])

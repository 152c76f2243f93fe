import numpy as np
import pytest

from evalign.masking import (
    DropoutSpec,
    MaskSchedule,
    PatchMask,
    dilate,
    mask_at_epoch,
    patch_activity_mask,
    sample_token_dropout,
)
from evalign.representation import OccupancyGrid


def occ_from_pixels(pixels, side=448):
    values = np.zeros((side, side), np.uint8)
    for y, x in pixels:
        values[y, x] = 1
    return OccupancyGrid(height=side, width=side, values=values)


def chebyshev_oracle(values: np.ndarray, radius: int) -> np.ndarray:
    """Brute force: active iff any active input within L-inf distance radius."""
    g = values.shape[0]
    out = np.zeros_like(values)
    for di in range(-radius, radius + 1):
        for dj in range(-radius, radius + 1):
            src_i = slice(max(0, -di), min(g, g - di))
            dst_i = slice(max(0, di), min(g, g + di))
            src_j = slice(max(0, -dj), min(g, g - dj))
            dst_j = slice(max(0, dj), min(g, g + dj))
            out[dst_i, dst_j] |= values[src_i, src_j]
    return out


class TestActivityMask:
    def test_pixel_13_13_hits_token_00(self):
        mask = patch_activity_mask(occ_from_pixels([(13, 13)]), patch=14)
        assert mask.grid_size == 32
        assert mask.values[0, 0] == 1
        assert mask.active_count() == 1

    def test_pixel_14_13_hits_token_10(self):
        mask = patch_activity_mask(occ_from_pixels([(14, 13)]), patch=14)
        assert mask.values[1, 0] == 1
        assert mask.active_count() == 1
        # row-major flat index: row 1, col 0
        assert mask.flat()[32] == 1

    def test_full_grid_all_active(self):
        occ = OccupancyGrid(448, 448, np.ones((448, 448), np.uint8))
        mask = patch_activity_mask(occ, patch=14)
        assert mask.active_count() == 1024

    def test_non_divisible_padded(self):
        occ = OccupancyGrid(15, 15, np.zeros((15, 15), np.uint8))
        occ.values[14, 14] = 1
        mask = patch_activity_mask(occ, patch=14)
        assert mask.grid_size == 2
        assert mask.values[1, 1] == 1

    def test_monotone_in_occupancy(self):
        rng = np.random.default_rng(0)
        base = (rng.random((28, 28)) < 0.1).astype(np.uint8)
        more = base.copy()
        more[rng.integers(0, 28, 10), rng.integers(0, 28, 10)] = 1
        m1 = patch_activity_mask(OccupancyGrid(28, 28, base), patch=14)
        m2 = patch_activity_mask(OccupancyGrid(28, 28, more), patch=14)
        assert np.all(m2.values >= m1.values)


class TestDilate:
    def test_center_radius_one(self):
        values = np.zeros((32, 32), np.uint8)
        values[16, 16] = 1
        out = dilate(PatchMask(values), 1)
        assert out.active_count() == 9

    def test_corner_radius_one(self):
        values = np.zeros((32, 32), np.uint8)
        values[0, 0] = 1
        out = dilate(PatchMask(values), 1)
        expected = chebyshev_oracle(values, 1)
        assert out.active_count() == 4
        assert np.array_equal(out.values, expected)
        active = {(0, 0), (0, 1), (1, 0), (1, 1)}
        assert {tuple(rc) for rc in np.argwhere(out.values)} == active

    def test_radius_zero_identity(self):
        rng = np.random.default_rng(1)
        values = (rng.random((32, 32)) < 0.2).astype(np.uint8)
        out = dilate(PatchMask(values), 0)
        assert np.array_equal(out.values, values)

    def test_matches_oracle_random(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            values = (rng.random((32, 32)) < rng.uniform(0.005, 0.3)).astype(np.uint8)
            r = int(rng.integers(0, 7))
            out = dilate(PatchMask(values), r)
            assert np.array_equal(out.values, chebyshev_oracle(values, r))

    def test_semigroup_property(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            values = (rng.random((32, 32)) < 0.05).astype(np.uint8)
            a, b = int(rng.integers(0, 4)), int(rng.integers(0, 4))
            two_step = dilate(dilate(PatchMask(values), a), b)
            one_step = dilate(PatchMask(values), a + b)
            assert np.array_equal(two_step.values, one_step.values)
            assert np.array_equal(one_step.values, chebyshev_oracle(values, a + b))


class TestSchedule:
    def setup_method(self):
        values = np.zeros((32, 32), np.uint8)
        values[10, 10] = 1
        self.base = PatchMask(values)
        self.sched = MaskSchedule()

    def test_before_first_step_radius_zero(self):
        out = mask_at_epoch(self.base, 9, self.sched)
        assert np.array_equal(out.values, self.base.values)

    def test_epoch_15_radius_4(self):
        out = mask_at_epoch(self.base, 15, self.sched)
        assert np.array_equal(out.values, chebyshev_oracle(self.base.values, 4))

    def test_epoch_20_and_beyond_radius_6(self):
        for epoch in (20, 25, 99):
            out = mask_at_epoch(self.base, epoch, self.sched)
            assert np.array_equal(out.values, chebyshev_oracle(self.base.values, 6))

    def test_transition_epochs_exact(self):
        radii = {e: self.sched.radius_at(e) for e in range(0, 25)}
        assert radii[9] == 0 and radii[10] == 2
        assert radii[14] == 2 and radii[15] == 4
        assert radii[19] == 4 and radii[20] == 6

    def test_monotone_active_set(self):
        prev = mask_at_epoch(self.base, 0, self.sched).values
        for epoch in range(1, 30):
            cur = mask_at_epoch(self.base, epoch, self.sched).values
            assert np.all(cur >= prev)
            prev = cur

    def test_linear_mode_uses_global_step(self):
        sched = MaskSchedule(linear_alpha=0.01, linear_sigma_max=5)
        assert sched.radius_at(0) == 0
        assert sched.radius_at(99) == 0
        assert sched.radius_at(100) == 1
        assert sched.radius_at(10_000) == 5

    def test_decreasing_radii_rejected(self):
        with pytest.raises(ValueError):
            MaskSchedule(steps={5: 4, 10: 2})


class TestDropout:
    def test_before_start_epoch_all_kept(self):
        spec = DropoutSpec(rho=0.30, start_epoch=8, seed=1)
        kept = sample_token_dropout(1024, spec, epoch=7, draw_index=0)
        assert len(kept) == 1024

    def test_floor_arithmetic_717_kept(self):
        # 1024 - floor(0.30 * 1024) = 1024 - 307 = 717
        spec = DropoutSpec(rho=0.30, start_epoch=8, seed=1)
        kept = sample_token_dropout(1024, spec, epoch=8, draw_index=0)
        assert len(kept) == 717

    def test_rho_zero_all_kept(self):
        spec = DropoutSpec(rho=0.0, start_epoch=0, seed=1)
        assert len(sample_token_dropout(64, spec, epoch=50, draw_index=3)) == 64

    def test_deterministic_and_sorted(self):
        spec = DropoutSpec(rho=0.25, start_epoch=0, seed=42)
        a = sample_token_dropout(64, spec, epoch=3, draw_index=9)
        b = sample_token_dropout(64, spec, epoch=3, draw_index=9)
        assert np.array_equal(a, b)
        assert np.all(np.diff(a) > 0)

    def test_distinct_draws_differ(self):
        spec = DropoutSpec(rho=0.5, start_epoch=0, seed=42)
        a = sample_token_dropout(256, spec, epoch=0, draw_index=0)
        b = sample_token_dropout(256, spec, epoch=0, draw_index=1)
        assert not np.array_equal(a, b)

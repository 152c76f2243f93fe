import time

import numpy as np
import pytest

from evalign.errors import EmptyErrors, EmptyInput, EmptyMatrix, NoValidPixels
from evalign.metrics import (
    AngularBinReport,
    ConfusionMatrix,
    abs_depth_error_at_cutoff,
    angular_bin_report,
    bench_harness,
    bench_report_text,
    inlier_ratio,
    median_error,
    miou_and_accuracy,
    pose_auc,
    relative_matching_density,
)


class TestMiou:
    def test_diagonal_perfect(self):
        cm = ConfusionMatrix(np.diag([5, 3, 9]))
        out = miou_and_accuracy(cm)
        assert np.allclose(out["iou"], 1.0)
        assert out["miou"] == 1.0
        assert out["accuracy"] == 1.0

    def test_two_class_hand_counts(self):
        cm = ConfusionMatrix(np.array([[1, 1], [1, 1]]))
        out = miou_and_accuracy(cm)
        assert np.allclose(out["iou"], [1 / 3, 1 / 3])
        assert out["miou"] == pytest.approx(1 / 3)
        assert out["accuracy"] == 0.5

    def test_absent_class_excluded(self):
        cm = ConfusionMatrix(np.array([[4, 0, 0], [0, 6, 0], [0, 0, 0]]))
        out = miou_and_accuracy(cm)
        assert np.isnan(out["iou"][2])
        assert out["miou"] == 1.0

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        gt = rng.integers(0, 4, 500)
        pred = rng.integers(0, 4, 500)
        order = rng.permutation(500)
        a = miou_and_accuracy(ConfusionMatrix.from_labels(gt, pred, 4))
        b = miou_and_accuracy(ConfusionMatrix.from_labels(gt[order], pred[order], 4))
        assert a["miou"] == b["miou"] and a["accuracy"] == b["accuracy"]

    def test_ignore_index_dropped(self):
        gt = np.array([0, 1, 255, 1])
        pred = np.array([0, 1, 3, 0])
        cm = ConfusionMatrix.from_labels(gt, pred, 4)
        assert cm.counts.sum() == 3

    def test_empty_matrix(self):
        with pytest.raises(EmptyMatrix):
            miou_and_accuracy(ConfusionMatrix(np.zeros((3, 3), np.int64)))


class TestDepthError:
    def test_perfect_zero(self):
        gt = np.array([[2.0, 5.0]])
        assert abs_depth_error_at_cutoff(gt.copy(), gt, 10.0) == 0.0

    def test_cutoff_masking(self):
        gt = np.array([5.0, 15.0])
        pred = np.array([6.0, 0.0])
        assert abs_depth_error_at_cutoff(pred, gt, 10.0) == 1.0

    def test_constant_bias(self):
        rng = np.random.default_rng(1)
        gt = rng.uniform(1, 9, (16, 16))
        assert abs_depth_error_at_cutoff(gt + 0.75, gt, 10.0) == pytest.approx(0.75)

    def test_invalid_gt_excluded(self):
        gt = np.array([np.nan, np.inf, -1.0, 4.0])
        pred = np.array([1.0, 1.0, 1.0, 5.0])
        assert abs_depth_error_at_cutoff(pred, gt, 10.0) == 1.0

    def test_no_valid_pixels(self):
        with pytest.raises(NoValidPixels):
            abs_depth_error_at_cutoff(np.ones(3), np.full(3, 99.0), 10.0)


class TestPoseAuc:
    def test_all_zero_errors(self):
        out = pose_auc([0.0, 0.0, 0.0])
        assert out[5.0] == 1.0 and out[10.0] == 1.0 and out[20.0] == 1.0

    def test_single_pair_half_threshold(self):
        for t in (5.0, 10.0, 20.0):
            out = pose_auc([t / 2], thresholds=(t,))
            assert out[t] == pytest.approx(0.5, abs=1e-12)

    def test_all_beyond_twenty(self):
        out = pose_auc([25.0, 90.0, float("inf")])
        assert out[5.0] == 0.0 and out[10.0] == 0.0 and out[20.0] == 0.0

    def test_failures_count_against(self):
        with_failure = pose_auc([1.0, float("inf")], thresholds=(10.0,))[10.0]
        without = pose_auc([1.0], thresholds=(10.0,))[10.0]
        assert with_failure < without

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(2)
        errors = rng.uniform(0, 30, 40)
        out = pose_auc(errors)
        assert out[5.0] <= out[10.0] <= out[20.0]

    def test_dropping_bad_pair_never_decreases_auc(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            errors = list(rng.uniform(0, 30, 15))
            errors.append(float(rng.uniform(10.001, 100)))
            full = pose_auc(errors, thresholds=(10.0,))[10.0]
            dropped = pose_auc(errors[:-1], thresholds=(10.0,))[10.0]
            assert dropped >= full

    def test_matches_numeric_integration(self):
        rng = np.random.default_rng(3)
        errors = np.sort(rng.uniform(0, 25, 31))
        t = 10.0
        grid = np.linspace(0, t, 200001)
        recall = (errors[None, :] <= grid[:, None]).mean(axis=1)
        numeric = np.trapezoid(recall, grid) / t
        exact = pose_auc(errors, thresholds=(t,))[t]
        assert exact == pytest.approx(numeric, abs=1e-4)

    def test_empty_errors(self):
        with pytest.raises(EmptyErrors):
            pose_auc([])


class TestSmallMetrics:
    def test_median_odd(self):
        assert median_error([3.0, 1.0, 2.0]) == 2.0

    def test_median_even_lower_middle(self):
        assert median_error([4.0, 1.0, 3.0, 2.0]) == 2.0

    def test_inlier_ratio(self):
        from evalign.matching import PoseEstimate
        pose = PoseEstimate(
            rotation=np.eye(3),
            translation=np.array([1.0, 0.0, 0.0]),
            inliers=np.array([True] * 40 + [False] * 60),
            iterations=10,
        )
        assert inlier_ratio(pose) == 0.40

    def test_relative_matching_density(self):
        out = relative_matching_density([10, 20], 40)
        assert np.array_equal(out, [0.25, 0.5])

    def test_empty_inputs(self):
        with pytest.raises(EmptyInput):
            median_error([])
        with pytest.raises(EmptyInput):
            relative_matching_density([], 10)


class TestAngularBins:
    def test_single_easy_bin(self):
        report = angular_bin_report([5.0, 7.0], [0.0, 0.0])
        assert report.bins["0-15"] == 1.0
        assert report.bins["15-30"] is None
        assert report.bins["30-45"] is None
        assert report.bins[">45"] is None

    def test_partition(self):
        report = angular_bin_report([10.0, 20.0], [0.0, 0.0])
        assert report.bins["0-15"] == 1.0
        assert report.bins["15-30"] == 1.0

    def test_boundary_half_open(self):
        report = angular_bin_report([15.0], [0.0])
        assert report.bins["0-15"] is None
        assert report.bins["15-30"] == 1.0

    def test_labels_stable(self):
        assert AngularBinReport.LABELS == ("0-15", "15-30", "30-45", ">45")


class TestBenchHarness:
    def test_sleep_stub_timing(self):
        report = bench_harness(
            [("sleep", lambda x: time.sleep(0.01) or x)],
            input_factory=lambda i: i,
            warmup=2,
            iters=12,
        )
        assert len(report.stages["sleep"].samples_ms) == 12
        assert report.stages["sleep"].mean == pytest.approx(10.0, rel=0.5)

    def test_exactly_fifty_samples_after_five_warmups(self):
        seen = []
        report = bench_harness(
            [("count", lambda x: seen.append(x) or x)],
            input_factory=lambda i: i,
            warmup=5,
            iters=50,
        )
        assert len(seen) == 55
        assert len(report.total.samples_ms) == 50
        assert report.warmup == 5 and report.iters == 50

    def test_fps_definition(self):
        report = bench_harness(
            [("fast", lambda x: x)], input_factory=lambda i: i, warmup=1, iters=5
        )
        assert report.fps == pytest.approx(1000.0 / report.total.mean)

    def test_stage_chaining_and_report_fields(self):
        report = bench_harness(
            [("extract", lambda x: x * 2), ("match", lambda x: x + 1)],
            input_factory=lambda i: i,
            warmup=1,
            iters=4,
        )
        assert set(report.stages) == {"extract", "match"}
        text = bench_report_text(report)
        assert "extract" in text and "match" in text and "fps" in text
        for stats in report.stages.values():
            assert stats.mean >= 0 and stats.std >= 0 and stats.median >= 0

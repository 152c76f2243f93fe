"""Evaluation metrics: segmentation, depth, pose recall curves, and the
latency harness.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from evalign.errors import EmptyErrors, EmptyInput, EmptyMatrix, NoValidPixels
from evalign.matching import PoseEstimate

POSE_THRESHOLDS = (5.0, 10.0, 20.0)
ANGULAR_BIN_EDGES = (0.0, 15.0, 30.0, 45.0)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (C, C), rows = ground truth, cols = prediction

    def __post_init__(self):
        self.counts = np.asarray(self.counts, np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise EmptyMatrix("confusion matrix must be square")

    @classmethod
    def from_labels(cls, gt: np.ndarray, pred: np.ndarray, classes: int,
                    ignore_index: int = 255) -> "ConfusionMatrix":
        gt = np.asarray(gt).reshape(-1)
        pred = np.asarray(pred).reshape(-1)
        keep = gt != ignore_index
        gt, pred = gt[keep].astype(np.int64), pred[keep].astype(np.int64)
        idx = gt * classes + pred
        counts = np.bincount(idx, minlength=classes * classes)
        return cls(counts.reshape(classes, classes))

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)


def miou_and_accuracy(cm: ConfusionMatrix) -> dict:
    """Per-class IoU, mean IoU over classes with nonzero union, pixel accuracy."""
    counts = cm.counts
    total = counts.sum()
    if total == 0:
        raise EmptyMatrix("confusion matrix has no counts")
    tp = np.diag(counts).astype(np.float64)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    union = tp + fp + fn
    iou = np.full(len(tp), np.nan)
    present = union > 0
    iou[present] = tp[present] / union[present]
    return {
        "iou": iou,
        "miou": float(iou[present].mean()) if present.any() else float("nan"),
        "accuracy": float(tp.sum() / total),
    }


def abs_depth_error_at_cutoff(pred: np.ndarray, gt: np.ndarray,
                              cutoff: float) -> float:
    """Mean |pred - gt| over pixels with finite gt in (0, cutoff]."""
    pred = np.asarray(pred, np.float64)
    gt = np.asarray(gt, np.float64)
    valid = np.isfinite(gt) & (gt > 0) & (gt <= cutoff)
    if not valid.any():
        raise NoValidPixels(f"no ground-truth pixels at the {cutoff} m cut-off")
    return float(np.abs(pred[valid] - gt[valid]).mean())


def pose_auc(errors, thresholds=POSE_THRESHOLDS) -> dict[float, float]:
    """Exact area under the recall-vs-error step function, per threshold.

    Failed estimates enter as +inf and count against every threshold.
    """
    errors = np.asarray(list(errors), np.float64)
    if errors.size == 0:
        raise EmptyErrors("pose AUC needs at least one error value")
    finite_sorted = np.sort(errors)
    n = errors.size
    out = {}
    for t in thresholds:
        inside = finite_sorted[finite_sorted <= t]
        # integrate recall(e) de over [0, t]: recall steps at each error
        area = 0.0
        prev = 0.0
        for k, e in enumerate(inside):
            area += (e - prev) * (k / n)
            prev = e
        area += (t - prev) * (len(inside) / n)
        out[float(t)] = float(area / t)
    return out


def median_error(errors) -> float:
    """Median with the lower-middle tie rule for even counts."""
    errors = np.sort(np.asarray(list(errors), np.float64))
    if errors.size == 0:
        raise EmptyInput("median of an empty sequence")
    return float(errors[(errors.size - 1) // 2])


def inlier_ratio(pose: PoseEstimate) -> float:
    total = len(pose.inliers)
    if total == 0:
        raise EmptyInput("pose has no correspondences")
    return float(pose.inliers.sum() / total)


def relative_matching_density(inlier_counts, max_keypoints: int) -> np.ndarray:
    """Per-pair inliers over the sequence-wide maximum keypoint count."""
    counts = np.asarray(list(inlier_counts), np.float64)
    if counts.size == 0:
        raise EmptyInput("no pairs to evaluate")
    if max_keypoints <= 0:
        raise EmptyInput("sequence max keypoints must be positive")
    return counts / float(max_keypoints)


@dataclass
class AngularBinReport:
    # AUC at 10 degrees per baseline bin; None marks empty bins
    bins: dict[str, float | None] = field(default_factory=dict)

    LABELS = ("0-15", "15-30", "30-45", ">45")


def angular_bin_report(baselines_deg, errors_deg,
                       auc_threshold: float = 10.0) -> AngularBinReport:
    """Partition pairs by ground-truth baseline angle (half-open bins)."""
    baselines = np.asarray(list(baselines_deg), np.float64)
    errors = np.asarray(list(errors_deg), np.float64)
    edges = list(ANGULAR_BIN_EDGES) + [np.inf]
    report = AngularBinReport()
    for label, lo, hi in zip(AngularBinReport.LABELS, edges[:-1], edges[1:]):
        inside = (baselines >= lo) & (baselines < hi)
        if not inside.any():
            report.bins[label] = None
            continue
        report.bins[label] = pose_auc(errors[inside], (auc_threshold,))[auc_threshold]
    return report


@dataclass
class StageStats:
    samples_ms: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples_ms))

    @property
    def median(self) -> float:
        return float(np.median(self.samples_ms))

    @property
    def std(self) -> float:
        return float(np.std(self.samples_ms))


@dataclass
class BenchReport:
    stages: dict[str, StageStats]
    total: StageStats
    warmup: int
    iters: int

    @property
    def fps(self) -> float:
        return 1000.0 / self.total.mean


def bench_harness(stages, input_factory, warmup: int = 5,
                  iters: int = 50) -> BenchReport:
    """Warm up, then time each pipeline stage for exactly ``iters`` runs.

    ``stages`` is an ordered list of (name, fn); each fn receives the
    previous stage's output (the first gets input_factory(i)). Only the
    timed iterations enter the report.
    """
    stages = list(stages)
    names = [name for name, _ in stages]
    per_stage = {name: [] for name in names}
    totals = []
    for i in range(warmup + iters):
        value = input_factory(i)
        timed = i >= warmup
        iter_total = 0.0
        for name, fn in stages:
            t0 = time.perf_counter()
            value = fn(value)
            elapsed_ms = (time.perf_counter() - t0) * 1000.0
            iter_total += elapsed_ms
            if timed:
                per_stage[name].append(elapsed_ms)
        if timed:
            totals.append(iter_total)
    return BenchReport(
        stages={name: StageStats(per_stage[name]) for name in names},
        total=StageStats(totals),
        warmup=warmup,
        iters=iters,
    )


def bench_report_text(report: BenchReport) -> str:
    lines = [
        f"{'stage':<12} {'mean_ms':>10} {'median_ms':>10} {'std_ms':>10}",
    ]
    for name, stats in report.stages.items():
        lines.append(
            f"{name:<12} {stats.mean:>10.3f} {stats.median:>10.3f} {stats.std:>10.3f}"
        )
    lines.append(
        f"{'total':<12} {report.total.mean:>10.3f} {report.total.median:>10.3f} "
        f"{report.total.std:>10.3f}"
    )
    lines.append(f"fps {report.fps:.2f} (warmup {report.warmup}, iters {report.iters})")
    return "\n".join(lines) + "\n"

"""Descriptor matching on patch tokens and relative-pose recovery.

Mutual cosine nearest neighbors give correspondences at patch centers; a
seeded RANSAC loop around the normalized eight-point solver scores
symmetric epipolar distance, refits the essential matrix on the inliers,
and picks the (R, t) decomposition by cheirality voting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from evalign.errors import (
    DegenerateConfiguration,
    NonRotation,
    TooFewCorrespondences,
)


@dataclass
class Correspondences:
    points_a: np.ndarray  # (N, 2) pixel coordinates
    points_b: np.ndarray  # (N, 2)
    scores: np.ndarray    # (N,)

    def __post_init__(self):
        if not (len(self.points_a) == len(self.points_b) == len(self.scores)):
            raise ValueError("correspondence arrays must be equal length")

    def __len__(self) -> int:
        return len(self.points_a)


@dataclass
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass
class PoseEstimate:
    rotation: np.ndarray       # (3, 3), orthonormal, det +1
    translation: np.ndarray    # unit 3-vector (direction only)
    inliers: np.ndarray        # (N,) bool
    iterations: int

    def __post_init__(self):
        r = self.rotation
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-6 or abs(np.linalg.det(r) - 1) > 1e-6:
            raise NonRotation("estimated rotation is not orthonormal")
        norm = np.linalg.norm(self.translation)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError("translation direction must be unit length")


def mutual_nn_match(desc_a: np.ndarray, desc_b: np.ndarray, grid: int,
                    min_sim: float = 0.0, patch: int = 14) -> Correspondences:
    """Cosine mutual nearest neighbors, reported at patch-center pixels."""
    a = _unit_rows(np.asarray(desc_a, np.float64))
    b = _unit_rows(np.asarray(desc_b, np.float64))
    sim = a @ b.T
    best_b = sim.argmax(axis=1)
    best_a = sim.argmax(axis=0)
    idx_a = np.arange(len(a))
    mutual = best_a[best_b] == idx_a
    keep = mutual & (sim[idx_a, best_b] >= min_sim)
    ia, ib = idx_a[keep], best_b[keep]
    return Correspondences(
        points_a=_token_centers(ia, grid, patch),
        points_b=_token_centers(ib, grid, patch),
        scores=sim[ia, ib],
    )


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.clip(norms, 1e-12, None)


def _token_centers(idx: np.ndarray, grid: int, patch: int) -> np.ndarray:
    rows, cols = idx // grid, idx % grid
    return np.stack([(cols + 0.5) * patch, (rows + 0.5) * patch], axis=1)


def _hartley_normalize(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    centroid = points.mean(axis=0)
    shifted = points - centroid
    mean_dist = np.sqrt((shifted ** 2).sum(axis=1)).mean()
    scale = np.sqrt(2.0) / max(mean_dist, 1e-12)
    t = np.array(
        [[scale, 0.0, -scale * centroid[0]],
         [0.0, scale, -scale * centroid[1]],
         [0.0, 0.0, 1.0]]
    )
    return shifted * scale, t


def _eight_point(pa: np.ndarray, pb: np.ndarray) -> np.ndarray | None:
    """Least-squares essential matrix from >= 8 normalized-camera points."""
    na, ta = _hartley_normalize(pa)
    nb, tb = _hartley_normalize(pb)
    x1, y1 = na[:, 0], na[:, 1]
    x2, y2 = nb[:, 0], nb[:, 1]
    a = np.stack(
        [x2 * x1, x2 * y1, x2, y2 * x1, y2 * y1, y2, x1, y1, np.ones_like(x1)],
        axis=1,
    )
    try:
        _, s, vt = np.linalg.svd(a)
    except np.linalg.LinAlgError:
        return None
    if s[-2] < 1e-12:  # rank-deficient system: degenerate sample
        return None
    e = vt[-1].reshape(3, 3)
    e = tb.T @ e @ ta
    # project onto the essential cone: equal leading singular values, rank 2
    u, s, vt = np.linalg.svd(e)
    mean = (s[0] + s[1]) / 2.0
    return u @ np.diag([mean, mean, 0.0]) @ vt


def _symmetric_epipolar_sq(e: np.ndarray, pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    ones = np.ones((len(pa), 1))
    xa = np.hstack([pa, ones])
    xb = np.hstack([pb, ones])
    ea = xa @ e.T   # lines in image b
    eb = xb @ e     # lines in image a
    num = np.einsum("ij,ij->i", xb, xa @ e.T) ** 2
    da = ea[:, 0] ** 2 + ea[:, 1] ** 2
    db = eb[:, 0] ** 2 + eb[:, 1] ** 2
    return num * (1.0 / np.clip(da, 1e-15, None) + 1.0 / np.clip(db, 1e-15, None))


def _triangulate(p0: np.ndarray, p1: np.ndarray, pa: np.ndarray,
                 pb: np.ndarray) -> np.ndarray:
    """DLT triangulation per correspondence; returns (N, 3) points."""
    out = np.zeros((len(pa), 3))
    for i, (a, b) in enumerate(zip(pa, pb)):
        m = np.stack(
            [
                a[0] * p0[2] - p0[0],
                a[1] * p0[2] - p0[1],
                b[0] * p1[2] - p1[0],
                b[1] * p1[2] - p1[1],
            ]
        )
        _, _, vt = np.linalg.svd(m)
        h = vt[-1]
        out[i] = h[:3] / h[3] if abs(h[3]) > 1e-12 else np.full(3, np.inf)
    return out


def _decompose(e: np.ndarray, pa: np.ndarray, pb: np.ndarray):
    u, _, vt = np.linalg.svd(e)
    if np.linalg.det(u) < 0:
        u = -u
    if np.linalg.det(vt) < 0:
        vt = -vt
    w = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    candidates = []
    for r in (u @ w @ vt, u @ w.T @ vt):
        for t in (u[:, 2], -u[:, 2]):
            candidates.append((r, t / np.linalg.norm(t)))
    p0 = np.hstack([np.eye(3), np.zeros((3, 1))])
    best, best_votes, best_margin = None, -1, -np.inf
    for r, t in candidates:
        p1 = np.hstack([r, t[:, None]])
        pts = _triangulate(p0, p1, pa, pb)
        z0 = pts[:, 2]
        z1 = (pts @ r.T + t)[:, 2]
        front = np.isfinite(z0) & (z0 > 0) & (z1 > 0)
        votes = int(front.sum())
        margin = float(np.minimum(z0, z1)[front].mean()) if votes else -np.inf
        if votes > best_votes or (votes == best_votes and margin > best_margin):
            best, best_votes, best_margin = (r, t), votes, margin
    return best


def estimate_essential_ransac(corrs: Correspondences, k_a: CameraIntrinsics,
                              k_b: CameraIntrinsics, iters: int = 2000,
                              threshold_px: float = 1.0, seed: int = 0,
                              confidence: float = 0.999) -> PoseEstimate:
    """Seeded RANSAC around the normalized eight-point solver.

    The pixel threshold converts to normalized units via the mean focal
    length; the best model is refit on its inliers before decomposition.
    Stops early once the usual confidence bound is met.
    """
    n = len(corrs)
    if n < 8:
        raise TooFewCorrespondences(f"need >= 8 correspondences, got {n}")
    pa = _normalize_points(corrs.points_a, k_a)
    pb = _normalize_points(corrs.points_b, k_b)
    focal = (k_a.fx + k_a.fy + k_b.fx + k_b.fy) / 4.0
    thresh_sq = (threshold_px / focal) ** 2

    rng = np.random.default_rng(seed)
    best_inliers = None
    best_score = -1
    iterations = 0
    max_iters = iters
    for it in range(iters):
        if it >= max_iters:
            break
        iterations = it + 1
        sample = rng.choice(n, size=8, replace=False)
        e = _eight_point(pa[sample], pb[sample])
        if e is None:
            continue
        residuals = _symmetric_epipolar_sq(e, pa, pb)
        inliers = residuals <= thresh_sq
        score = int(inliers.sum())
        if score > best_score:
            best_score = score
            best_inliers = inliers
            if score >= 8:
                ratio = score / n
                denom = np.log1p(-min(ratio ** 8, 1 - 1e-12))
                max_iters = min(iters, int(np.ceil(np.log(1 - confidence) / denom)))
    if best_inliers is None or best_score < 8:
        raise DegenerateConfiguration("no RANSAC sample produced a valid model")

    e = _eight_point(pa[best_inliers], pb[best_inliers])
    if e is None:
        raise DegenerateConfiguration("inlier refit is rank-deficient")
    residuals = _symmetric_epipolar_sq(e, pa, pb)
    inliers = residuals <= thresh_sq
    if inliers.sum() < 8:
        inliers = best_inliers
        e = _eight_point(pa[inliers], pb[inliers])
    decomposition = _decompose(e, pa[inliers], pb[inliers])
    if decomposition is None:
        raise DegenerateConfiguration("cheirality voting rejected all candidates")
    r, t = decomposition
    return PoseEstimate(
        rotation=r, translation=t, inliers=inliers, iterations=iterations
    )


def _normalize_points(points: np.ndarray, k: CameraIntrinsics) -> np.ndarray:
    out = np.asarray(points, np.float64).copy()
    out[:, 0] = (out[:, 0] - k.cx) / k.fx
    out[:, 1] = (out[:, 1] - k.cy) / k.fy
    return out


def rotation_angular_error(r_est: np.ndarray, r_gt: np.ndarray) -> float:
    """Geodesic rotation distance in degrees."""
    for r in (r_est, r_gt):
        r = np.asarray(r)
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-4 or abs(np.linalg.det(r) - 1) > 1e-4:
            raise NonRotation("input is not a rotation matrix")
    cos_angle = (np.trace(r_gt.T @ r_est) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(cos_angle, -1.0, 1.0))))


def rotation_about(axis: np.ndarray, degrees: float) -> np.ndarray:
    """Rodrigues rotation matrix (used by the synthetic fixtures)."""
    axis = np.asarray(axis, np.float64)
    axis = axis / np.linalg.norm(axis)
    theta = np.radians(degrees)
    k = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    return np.eye(3) + np.sin(theta) * k + (1 - np.cos(theta)) * (k @ k)


def synthetic_pose_scene(seed: int, n_points: int = 100, rotation_deg: float = 10.0,
                         noise_px: float = 0.0,
                         intrinsics: CameraIntrinsics | None = None):
    """Project a random non-planar point cloud into two views.

    Returns (correspondences, intrinsics, R_gt, t_gt) with every point in
    front of both cameras.
    """
    k = intrinsics or CameraIntrinsics(fx=320.0, fy=320.0, cx=224.0, cy=224.0)
    rng = np.random.default_rng(seed)
    axis = rng.normal(size=3)
    r_gt = rotation_about(axis, rotation_deg)
    t_gt = rng.normal(size=3)
    t_gt /= np.linalg.norm(t_gt)
    t_gt *= 0.5

    points, pix_a, pix_b = [], [], []
    km = k.matrix()
    while len(points) < n_points:
        X = np.array([rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(5, 14)])
        xb = r_gt @ X + t_gt
        if xb[2] <= 0.1:
            continue
        ua = km @ X
        ub = km @ xb
        points.append(X)
        pix_a.append(ua[:2] / ua[2])
        pix_b.append(ub[:2] / ub[2])
    pix_a = np.array(pix_a)
    pix_b = np.array(pix_b)
    if noise_px > 0:
        pix_a = pix_a + rng.normal(0, noise_px, pix_a.shape)
        pix_b = pix_b + rng.normal(0, noise_px, pix_b.shape)
    corrs = Correspondences(
        points_a=pix_a, points_b=pix_b, scores=np.ones(len(pix_a))
    )
    return corrs, k, r_gt, t_gt / np.linalg.norm(t_gt)


def correspondences_to_csv(corrs: Correspondences) -> str:
    lines = ["xa,ya,xb,yb,sim"]
    for (xa, ya), (xb, yb), s in zip(corrs.points_a, corrs.points_b, corrs.scores):
        lines.append(",".join(repr(float(v)) for v in (xa, ya, xb, yb, s)))
    return "\n".join(lines) + "\n"


def correspondences_from_csv(text: str) -> Correspondences:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0] != "xa,ya,xb,yb,sim":
        raise ValueError("correspondence CSV needs header xa,ya,xb,yb,sim")
    rows = np.array(
        [[float(v) for v in ln.split(",")] for ln in lines[1:]], np.float64
    ).reshape(-1, 5)
    return Correspondences(
        points_a=rows[:, 0:2], points_b=rows[:, 2:4], scores=rows[:, 4]
    )

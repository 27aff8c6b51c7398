"""Rigid transform estimation from correspondences: weighted SVD and RANSAC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationDegenerateError, EstimationFailedError, InvalidArgumentError
from .filtering import FilterTrace
from .geometry import RigidTransform
from .matching import CorrespondenceSet

# Three points are always coplanar, so rank-2 (second singular value above
# this floor) is the usable non-degeneracy test; rank < 2 means collinear.
_DEGENERATE_TOL = 1e-9


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator selection plus RANSAC budget and thresholds."""

    method: str = "weighted_svd"
    ransac_iterations: int = 50_000
    ransac_inlier_threshold: float = 0.05
    ransac_sample_size: int = 3
    confidence: float = 0.999
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("weighted_svd", "ransac"):
            raise InvalidArgumentError(f"unknown estimation method {self.method!r}")
        if self.ransac_sample_size < 3:
            raise InvalidArgumentError(
                f"ransac_sample_size must be >= 3, got {self.ransac_sample_size}"
            )
        if self.ransac_iterations < 1:
            raise InvalidArgumentError(
                f"ransac_iterations must be >= 1, got {self.ransac_iterations}"
            )
        if self.ransac_inlier_threshold <= 0:
            raise InvalidArgumentError(
                f"ransac_inlier_threshold must be > 0, got {self.ransac_inlier_threshold}"
            )
        if not 0 < self.confidence < 1:
            raise InvalidArgumentError(f"confidence must be in (0, 1), got {self.confidence}")


def _source_rank_deficient(centered: np.ndarray, weights: np.ndarray | None = None) -> bool:
    spread = centered if weights is None else centered * np.sqrt(weights)[:, None]
    singular = np.linalg.svd(spread, compute_uv=False)
    return singular[1] < _DEGENERATE_TOL


def weighted_svd(correspondences: CorrespondenceSet, weights) -> RigidTransform:
    """Least-squares rigid fit minimizing sum w_i ||R p_i + t - q_i||^2.

    Weighted centroids are subtracted, the weighted cross-covariance is
    decomposed by SVD, and the reflection case is corrected so the result is
    a proper rotation. Weights may be any nonnegative values, not all zero;
    scaling them by a positive constant does not change the result.
    """
    n = len(correspondences)
    if n < 3:
        raise EstimationDegenerateError(f"need at least 3 correspondences, got {n}")
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape[0] != n:
        raise InvalidArgumentError(f"got {w.shape[0]} weights for {n} correspondences")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidArgumentError("weights must be finite and nonnegative")
    total = w.sum()
    if total == 0:
        raise EstimationDegenerateError("all correspondence weights are zero")
    w = w / total

    src = correspondences.source_points
    tgt = correspondences.target_points
    src_centroid = w @ src
    tgt_centroid = w @ tgt
    src_centered = src - src_centroid
    tgt_centered = tgt - tgt_centroid
    if _source_rank_deficient(src_centered, w):
        raise EstimationDegenerateError("weighted source configuration is collinear")

    cross = (src_centered * w[:, None]).T @ tgt_centered
    u, _, vt = np.linalg.svd(cross)
    v = vt.T
    det = np.linalg.det(v @ u.T)
    rotation = v @ np.diag([1.0, 1.0, det]) @ u.T
    translation = tgt_centroid - rotation @ src_centroid
    return RigidTransform(rotation, translation)


def ransac(
    correspondences: CorrespondenceSet, config: EstimatorConfig
) -> tuple[RigidTransform, np.ndarray]:
    """Hypothesize-and-verify rigid estimation, deterministic given the seed.

    Each iteration samples `ransac_sample_size` pairs, fits an unweighted
    rigid transform, and counts residuals within the inlier threshold. The
    iteration budget shrinks adaptively once a strong consensus appears
    (stopping at the configured confidence). The best model is refit on its
    consensus set with uniform weights; that consensus set is returned.
    """
    n = len(correspondences)
    sample_size = config.ransac_sample_size
    if n < sample_size:
        raise InvalidArgumentError(
            f"need at least {sample_size} correspondences for RANSAC, got {n}"
        )
    rng = np.random.default_rng(config.seed)
    src = correspondences.source_points
    tgt = correspondences.target_points

    best_count = 0
    best_inliers: np.ndarray | None = None
    iteration_budget = config.ransac_iterations
    iteration = 0
    while iteration < min(config.ransac_iterations, iteration_budget):
        iteration += 1
        sample = rng.choice(n, size=sample_size, replace=False)
        sample_src = src[sample]
        if _source_rank_deficient(sample_src - sample_src.mean(axis=0)):
            continue
        model = weighted_svd(correspondences.select(sample), np.ones(sample_size))
        residuals = np.linalg.norm(model.apply(src) - tgt, axis=1)
        inliers = residuals <= config.ransac_inlier_threshold
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers
            ratio = count / n
            miss = 1.0 - ratio**sample_size
            miss = min(max(miss, 1e-12), 1.0 - 1e-12)
            iteration_budget = int(np.ceil(np.log(1.0 - config.confidence) / np.log(miss)))

    if best_inliers is None or best_count < sample_size:
        raise EstimationFailedError(
            f"no hypothesis reached {sample_size} inliers in {iteration} iterations"
        )
    consensus = np.flatnonzero(best_inliers)
    refit = weighted_svd(correspondences.select(consensus), np.ones(consensus.size))
    return refit, consensus


def estimate(
    correspondences: CorrespondenceSet,
    trace: FilterTrace | None,
    config: EstimatorConfig,
) -> RigidTransform:
    """Estimate the rigid transform using the configured method.

    The weighted-SVD path weights each surviving correspondence by its
    final-layer second-order consistency row sum (uniform weights when no
    filtering ran); the RANSAC path ignores weights.
    """
    if config.method == "ransac":
        transform, _ = ransac(correspondences, config)
        return transform
    weights = trace.final_weights() if trace is not None else None
    if weights is None:
        weights = np.ones(len(correspondences))
    if weights.shape[0] != len(correspondences):
        raise InvalidArgumentError(
            f"trace weights cover {weights.shape[0]} correspondences, set has {len(correspondences)}"
        )
    weights = weights / weights.sum()
    return weighted_svd(correspondences, weights)

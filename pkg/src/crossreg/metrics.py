"""Registration evaluation metrics: IR, FMR, RE, TE, RMSE, and recall.

All success predicates use strict inequalities, matching the indicator
functions they implement; a pair sitting exactly on a threshold fails.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError
from .geometry import RigidTransform
from .matching import CorrespondenceSet


@dataclass(frozen=True)
class MetricThresholds:
    """Inlier distance, FMR cutoff, and registration success bounds."""

    tau1: float = 0.1
    tau2: float = 0.05
    re_max_deg: float = 15.0
    te_max: float = 0.3
    rmse_max: float = 0.2

    def __post_init__(self):
        for name in ("tau1", "tau2", "re_max_deg", "te_max", "rmse_max"):
            if getattr(self, name) <= 0:
                raise InvalidArgumentError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class PairEvaluation:
    """Per-pair metric record; `rmse` is None when no ground-truth pairs exist."""

    ir: float
    re_deg: float
    te: float
    rmse: float | None
    registered: bool

    def __post_init__(self):
        if not 0.0 <= self.ir <= 1.0:
            raise InvalidArgumentError(f"inlier ratio must be in [0, 1], got {self.ir}")
        if not 0.0 <= self.re_deg <= 180.0:
            raise InvalidArgumentError(f"rotation error must be in [0, 180], got {self.re_deg}")
        if self.te < 0:
            raise InvalidArgumentError(f"translation error must be >= 0, got {self.te}")


def inlier_ratio(
    correspondences: CorrespondenceSet, gt: RigidTransform, tau1: float = 0.1
) -> float:
    """Fraction of pairs with || gt(p) - q || strictly below tau1."""
    if len(correspondences) == 0:
        raise InvalidArgumentError("inlier ratio of an empty correspondence set is undefined")
    residuals = np.linalg.norm(
        gt.apply(correspondences.source_points) - correspondences.target_points, axis=1
    )
    return float(np.count_nonzero(residuals < tau1)) / len(correspondences)


def feature_matching_recall(inlier_ratios: Sequence[float], tau2: float = 0.05) -> float:
    """Fraction of pairs whose inlier ratio strictly exceeds tau2."""
    ratios = np.asarray(inlier_ratios, dtype=np.float64)
    if ratios.size == 0:
        raise InvalidArgumentError("feature matching recall of an empty list is undefined")
    return float(np.count_nonzero(ratios > tau2)) / ratios.size


def rotation_error(est: RigidTransform, gt: RigidTransform) -> float:
    """Geodesic distance between the rotations, in degrees.

    The arccos argument is clamped to [-1, 1] so numerical drift in the trace
    never produces NaN.
    """
    trace = float(np.trace(est.rotation.T @ gt.rotation))
    return float(np.degrees(np.arccos(np.clip((trace - 1.0) / 2.0, -1.0, 1.0))))


def translation_error(est: RigidTransform, gt: RigidTransform) -> float:
    """Euclidean distance between the translation vectors, in meters."""
    return float(np.linalg.norm(est.translation - gt.translation))


def correspondence_rmse(pairs: CorrespondenceSet, est: RigidTransform) -> float:
    """Root mean squared residual || est(p) - q || over ground-truth pairs."""
    if len(pairs) == 0:
        raise InvalidArgumentError("RMSE of an empty pair set is undefined")
    residuals = np.linalg.norm(est.apply(pairs.source_points) - pairs.target_points, axis=1)
    return float(np.sqrt(np.mean(residuals**2)))


def registration_recall(
    evaluations: Sequence[PairEvaluation],
    thresholds: MetricThresholds = MetricThresholds(),
    mode: str = "cross_source",
) -> float:
    """Fraction of pairs meeting the success predicate of the chosen mode.

    cross_source: RE < re_max_deg and TE < te_max. rmse: RMSE < rmse_max
    (every evaluation must carry an RMSE value).
    """
    if len(evaluations) == 0:
        raise InvalidArgumentError("registration recall of an empty list is undefined")
    if mode == "cross_source":
        hits = sum(
            1
            for e in evaluations
            if e.re_deg < thresholds.re_max_deg and e.te < thresholds.te_max
        )
    elif mode == "rmse":
        if any(e.rmse is None for e in evaluations):
            raise InvalidArgumentError("rmse mode requires an RMSE value for every pair")
        hits = sum(1 for e in evaluations if e.rmse < thresholds.rmse_max)
    else:
        raise InvalidArgumentError(f"unknown recall mode {mode!r}")
    return hits / len(evaluations)

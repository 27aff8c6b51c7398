"""Hierarchical correspondence filtering by second-order length consistency.

Two correspondences agree when their source-side and target-side keypoint
gaps differ by at most a distance threshold; a rigid motion preserves all
pairwise distances, so true correspondences agree with each other. Each
filter layer scores every correspondence by how strongly it participates in
mutually agreeing triples (second-order consistency) and keeps the top
fraction by score. Stacking layers purges dense outliers progressively while
retaining the consistent core.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InvalidArgumentError, TooFewCorrespondencesError
from .matching import CorrespondenceSet

DEFAULT_MAX_CORRESPONDENCES = 10_000


@dataclass(frozen=True)
class FilterConfig:
    """Consistency threshold, retention fraction, and layer schedule."""

    sigma_d: float = 0.1
    keep_ratio: float = 0.8
    layers: int = 5
    min_survivors: int = 10
    max_correspondences: int = DEFAULT_MAX_CORRESPONDENCES

    def __post_init__(self):
        if self.sigma_d <= 0:
            raise InvalidArgumentError(f"sigma_d must be > 0, got {self.sigma_d}")
        if not 0 < self.keep_ratio <= 1:
            raise InvalidArgumentError(f"keep_ratio must be in (0, 1], got {self.keep_ratio}")
        if self.layers < 0:
            raise InvalidArgumentError(f"layers must be >= 0, got {self.layers}")
        if self.min_survivors < 0:
            raise InvalidArgumentError(f"min_survivors must be >= 0, got {self.min_survivors}")


@dataclass(frozen=True)
class FilterLayerRecord:
    """Diagnostics for one layer: input size, survivors, and their scores."""

    input_count: int
    retained_indices: np.ndarray
    row_sums: np.ndarray


@dataclass(frozen=True)
class FilterTrace:
    """Per-layer records accumulated by hierarchical_filter."""

    layers: tuple[FilterLayerRecord, ...] = ()

    def final_weights(self) -> np.ndarray | None:
        """Second-order row sums of the surviving correspondences, or None."""
        if not self.layers:
            return None
        last = self.layers[-1]
        return last.row_sums[last.retained_indices].astype(np.float64)


def consistency_distance(a: tuple[np.ndarray, np.ndarray], b: tuple[np.ndarray, np.ndarray]) -> float:
    """| ||p_a - p_b|| - ||q_a - q_b|| | for correspondences a = (p_a, q_a), b = (p_b, q_b)."""
    pa, qa = (np.asarray(v, dtype=np.float64) for v in a)
    pb, qb = (np.asarray(v, dtype=np.float64) for v in b)
    return abs(float(np.linalg.norm(pa - pb)) - float(np.linalg.norm(qa - qb)))


def _consistency_matrix(correspondences: CorrespondenceSet, sigma_d: float) -> np.ndarray:
    src_gap = cdist(correspondences.source_points, correspondences.source_points)
    tgt_gap = cdist(correspondences.target_points, correspondences.target_points)
    return (np.abs(src_gap - tgt_gap) <= sigma_d).astype(np.float64)


def second_order_scores(
    correspondences: CorrespondenceSet,
    sigma_d: float,
    *,
    max_correspondences: int = DEFAULT_MAX_CORRESPONDENCES,
) -> np.ndarray:
    """Per-correspondence row sums of the second-order consistency matrix.

    With s the binary first-order agreement matrix (diagonal 1 since every
    correspondence agrees with itself), the second-order score of a pair
    (i, j) is s_ij * sum_k s_ik * s_kj; this returns sum_j of that matrix per
    row i, exactly, as integers.
    """
    n = len(correspondences)
    if n < 2:
        raise TooFewCorrespondencesError(f"need at least 2 correspondences, got {n}")
    if n > max_correspondences:
        raise InvalidArgumentError(
            f"{n} correspondences exceed the {max_correspondences} cap (O(n^2) memory)"
        )
    if sigma_d <= 0:
        raise InvalidArgumentError(f"sigma_d must be > 0, got {sigma_d}")
    s = _consistency_matrix(correspondences, sigma_d)
    # float64 keeps BLAS in play; all intermediates are integers < 2**53 so
    # the arithmetic stays exact.
    second_order = s * (s @ s)
    return np.rint(second_order.sum(axis=1)).astype(np.int64)


def _retain_count(n: int, config: FilterConfig) -> int:
    return max(int(np.ceil(config.keep_ratio * n)), min(config.min_survivors, n))


def _filter_layer(
    correspondences: CorrespondenceSet, config: FilterConfig
) -> tuple[CorrespondenceSet, FilterLayerRecord]:
    n = len(correspondences)
    row_sums = second_order_scores(
        correspondences, config.sigma_d, max_correspondences=config.max_correspondences
    )
    keep = _retain_count(n, config)
    # Stable sort on negated scores keeps the smaller input index on ties;
    # survivors are then restored to input order.
    order = np.argsort(-row_sums, kind="stable")[:keep]
    retained = np.sort(order)
    return correspondences.select(retained), FilterLayerRecord(n, retained, row_sums)


def filter_layer(correspondences: CorrespondenceSet, config: FilterConfig) -> CorrespondenceSet:
    """One retention round: keep ceil(keep_ratio * n) by second-order score.

    Never returns fewer than min(min_survivors, n) correspondences. Survivors
    preserve their input order.
    """
    filtered, _ = _filter_layer(correspondences, config)
    return filtered


def hierarchical_filter(
    correspondences: CorrespondenceSet, config: FilterConfig
) -> tuple[CorrespondenceSet, FilterTrace]:
    """Apply filter_layer `config.layers` times, stopping at the survivor floor."""
    if len(correspondences) < 2:
        raise TooFewCorrespondencesError(
            f"need at least 2 correspondences, got {len(correspondences)}"
        )
    current = correspondences
    records: list[FilterLayerRecord] = []
    for _ in range(config.layers):
        if len(current) <= config.min_survivors:
            break
        current, record = _filter_layer(current, config)
        records.append(record)
    return current, FilterTrace(tuple(records))

"""Initial correspondence generation between two descriptor sets.

The soft route computes a cosine similarity matrix, sharpens it with a dual
softmax (row-wise times column-wise), and keeps the k largest entries as
correspondences; a keypoint may appear in several pairs. Mutual nearest
neighbor matching is provided as the stricter alternative for ablations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import softmax

from .descriptor import VoxelDescriptor, as_feature_matrix
from .errors import InvalidArgumentError


@dataclass(frozen=True)
class CorrespondenceSet:
    """Paired source/target keypoints with a per-pair score."""

    source_points: np.ndarray
    target_points: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        src = np.asarray(self.source_points, dtype=np.float64).reshape(-1, 3)
        tgt = np.asarray(self.target_points, dtype=np.float64).reshape(-1, 3)
        scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if not (src.shape[0] == tgt.shape[0] == scores.shape[0]):
            raise InvalidArgumentError(
                f"mismatched correspondence lengths: {src.shape[0]}, {tgt.shape[0]}, {scores.shape[0]}"
            )
        if not np.all(np.isfinite(scores)):
            raise InvalidArgumentError("correspondence scores must be finite")
        for name, arr in (("source_points", src), ("target_points", tgt), ("scores", scores)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.scores.shape[0]

    def select(self, indices) -> "CorrespondenceSet":
        idx = np.asarray(indices, dtype=np.intp)
        return CorrespondenceSet(self.source_points[idx], self.target_points[idx], self.scores[idx])


def _normalize_rows(features: np.ndarray, side: str) -> np.ndarray:
    norms = np.linalg.norm(features, axis=1)
    bad = np.flatnonzero(norms == 0)
    if bad.size:
        raise InvalidArgumentError(f"{side} descriptor {int(bad[0])} has zero norm")
    return features / norms[:, None]


def cosine_similarity_matrix(
    desc_a: Sequence[VoxelDescriptor] | np.ndarray,
    desc_b: Sequence[VoxelDescriptor] | np.ndarray,
) -> np.ndarray:
    """S[i, j] = cosine of the angle between descriptor i and descriptor j."""
    a = as_feature_matrix(desc_a)
    b = as_feature_matrix(desc_b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise InvalidArgumentError("descriptor sets must be non-empty")
    if a.shape[1] != b.shape[1]:
        raise InvalidArgumentError(
            f"descriptor dimensions differ: {a.shape[1]} vs {b.shape[1]}"
        )
    return _normalize_rows(a, "source") @ _normalize_rows(b, "target").T


def dual_softmax(similarity: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Element-wise product of row-wise and column-wise softmax of S / temperature.

    Invariant under adding a constant to every entry of S.
    """
    if temperature <= 0:
        raise InvalidArgumentError(f"temperature must be > 0, got {temperature}")
    scaled = np.asarray(similarity, dtype=np.float64) / temperature
    return softmax(scaled, axis=1) * softmax(scaled, axis=0)


def topk_correspondences(
    assignment: np.ndarray,
    src_keypoints: np.ndarray,
    tgt_keypoints: np.ndarray,
    k: int,
) -> CorrespondenceSet:
    """The k entries of the assignment matrix with the largest scores.

    Ties are broken toward the lexicographically smallest (row, column) pair,
    so the result is deterministic.
    """
    m = np.asarray(assignment, dtype=np.float64)
    src = np.asarray(src_keypoints, dtype=np.float64).reshape(-1, 3)
    tgt = np.asarray(tgt_keypoints, dtype=np.float64).reshape(-1, 3)
    if m.shape != (src.shape[0], tgt.shape[0]):
        raise InvalidArgumentError(
            f"assignment shape {m.shape} does not match keypoint counts {(src.shape[0], tgt.shape[0])}"
        )
    if not 1 <= k <= m.size:
        raise InvalidArgumentError(f"k must satisfy 1 <= k <= {m.size}, got {k}")
    flat = m.ravel()  # row-major: flat order is lexicographic (i, j) order
    order = np.argsort(-flat, kind="stable")[:k]
    rows, cols = np.unravel_index(order, m.shape)
    return CorrespondenceSet(src[rows], tgt[cols], flat[order])


def mutual_nearest_neighbor(
    similarity: np.ndarray,
    src_keypoints: np.ndarray,
    tgt_keypoints: np.ndarray,
) -> CorrespondenceSet:
    """Pairs (i, j) that are each other's best match in the similarity matrix.

    May be empty; the caller decides whether that is a failure.
    """
    s = np.asarray(similarity, dtype=np.float64)
    src = np.asarray(src_keypoints, dtype=np.float64).reshape(-1, 3)
    tgt = np.asarray(tgt_keypoints, dtype=np.float64).reshape(-1, 3)
    if s.size == 0:
        raise InvalidArgumentError("similarity matrix must be non-empty")
    if s.shape != (src.shape[0], tgt.shape[0]):
        raise InvalidArgumentError(
            f"similarity shape {s.shape} does not match keypoint counts {(src.shape[0], tgt.shape[0])}"
        )
    best_col = np.argmax(s, axis=1)
    best_row = np.argmax(s, axis=0)
    rows = np.arange(s.shape[0])
    mutual = best_row[best_col] == rows
    rows = rows[mutual]
    cols = best_col[mutual]
    return CorrespondenceSet(src[rows], tgt[cols], s[rows, cols])

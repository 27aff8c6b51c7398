"""Core geometric primitives: point clouds, rigid transforms, spatial search.

Everything downstream (descriptors, matching, filtering, estimation) is built
on the types and operations in this module. All types are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidArgumentError

_ORTHONORMAL_TOL = 1e-9


def _as_points(values) -> np.ndarray:
    pts = np.asarray(values, dtype=np.float64)
    if pts.size == 0:
        pts = pts.reshape(0, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidArgumentError(f"points must have shape (n, 3), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InvalidArgumentError("points contain NaN or Inf coordinates")
    return pts


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PointCloud:
    """An ordered set of 3D points in meters.

    Coordinates must be finite. An empty cloud may be constructed, but
    pipeline entry points reject it.
    """

    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen(_as_points(self.points)))

    def __len__(self) -> int:
        return self.points.shape[0]

    def select(self, indices) -> "PointCloud":
        return PointCloud(self.points[np.asarray(indices, dtype=np.intp)])

    def centroid(self) -> np.ndarray:
        if len(self) == 0:
            raise InvalidArgumentError("centroid of an empty cloud is undefined")
        return self.points.mean(axis=0)


@dataclass(frozen=True)
class RigidTransform:
    """A proper rigid motion q = rotation @ p + translation.

    The rotation must be orthonormal with determinant +1, both within 1e-9.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        trans = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        if rot.shape != (3, 3):
            raise InvalidArgumentError(f"rotation must be 3x3, got {rot.shape}")
        if trans.shape != (3,):
            raise InvalidArgumentError(f"translation must be a 3-vector, got shape {trans.shape}")
        if not (np.all(np.isfinite(rot)) and np.all(np.isfinite(trans))):
            raise InvalidArgumentError("transform contains NaN or Inf")
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > _ORTHONORMAL_TOL:
            raise InvalidArgumentError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(rot) - 1.0) > _ORTHONORMAL_TOL:
            raise InvalidArgumentError("rotation determinant is not +1 within 1e-9")
        object.__setattr__(self, "rotation", _frozen(rot))
        object.__setattr__(self, "translation", _frozen(trans))

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (n, 3) array of points."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def compose(self, first: "RigidTransform") -> "RigidTransform":
        """Return the transform equivalent to applying `first`, then `self`."""
        return RigidTransform(
            self.rotation @ first.rotation,
            self.rotation @ first.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)


@dataclass(frozen=True)
class SpatialIndex:
    """Radius-search acceleration structure over one cloud (kd-tree backed).

    Queries return exactly the brute-force result set; only the order may
    differ. The index is rebuilt per cloud and supports concurrent reads.
    """

    cloud: PointCloud
    _tree: cKDTree = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_tree", cKDTree(self.cloud.points))

    def radius_query(self, center: np.ndarray, radius: float) -> np.ndarray:
        """Indices of all points with Euclidean distance <= radius of center."""
        if radius <= 0:
            raise InvalidArgumentError(f"radius must be positive, got {radius}")
        idx = self._tree.query_ball_point(np.asarray(center, dtype=np.float64), radius)
        return np.sort(np.asarray(idx, dtype=np.intp))

    def radius_query_many(self, centers: np.ndarray, radius: float) -> list[np.ndarray]:
        if radius <= 0:
            raise InvalidArgumentError(f"radius must be positive, got {radius}")
        hits = self._tree.query_ball_point(np.asarray(centers, dtype=np.float64), radius)
        return [np.sort(np.asarray(h, dtype=np.intp)) for h in hits]


def apply_transform(cloud: PointCloud, transform: RigidTransform) -> PointCloud:
    """Apply a rigid transform to every point, preserving order."""
    return PointCloud(transform.apply(cloud.points))


def radius_neighbors(index: SpatialIndex, center, radius: float) -> np.ndarray:
    """All indices within `radius` of `center` (closed ball)."""
    return index.radius_query(center, radius)


def farthest_point_sample(cloud: PointCloud, k: int, seed: int) -> np.ndarray:
    """Greedy farthest-point sampling of k keypoint indices.

    The first index is drawn uniformly from the seeded RNG; every subsequent
    pick maximizes the minimum distance to the points already chosen, with
    ties resolved to the lowest index. Deterministic given (cloud, k, seed).
    """
    n = len(cloud)
    if k == 0 or k > n:
        raise InvalidArgumentError(f"k must satisfy 1 <= k <= {n}, got {k}")
    rng = np.random.default_rng(seed)
    first = int(rng.integers(n))

    chosen = np.empty(k, dtype=np.intp)
    chosen[0] = first
    min_dist = np.linalg.norm(cloud.points - cloud.points[first], axis=1)
    for i in range(1, k):
        nxt = int(np.argmax(min_dist))  # argmax takes the lowest index on ties
        chosen[i] = nxt
        np.minimum(min_dist, np.linalg.norm(cloud.points - cloud.points[nxt], axis=1), out=min_dist)
    return chosen


def voxel_downsample(cloud: PointCloud, side: float, seed: int = 0) -> PointCloud:
    """Collapse each occupied cubic voxel of edge `side` to its centroid.

    The voxel grid is anchored at the origin, so results are translation
    sensitive. side = 0 disables downsampling and returns the input. The
    representative is the centroid, which is deterministic; `seed` is accepted
    so callers can thread one seed through every sampling operation uniformly.
    """
    if side < 0:
        raise InvalidArgumentError(f"voxel side must be >= 0, got {side}")
    if side == 0 or len(cloud) == 0:
        return cloud
    keys = np.floor(cloud.points / side).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    sums = np.zeros((counts.shape[0], 3), dtype=np.float64)
    np.add.at(sums, inverse, cloud.points)
    return PointCloud(sums / counts[:, None])

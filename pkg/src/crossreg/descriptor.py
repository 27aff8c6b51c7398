"""Density-invariant keypoint descriptors from spherical voxel occupancy.

A keypoint patch (all cloud points within a radius) is expressed in a local
reference frame, binned into a sphere partitioned along azimuth, polar angle,
and radius, and normalized so that the resulting grid is insensitive to the
sampling density of the source sensor. Two normalizations are provided:

* whole-sphere: every bin divided by the total patch point count;
* multi-scale: each radial shell divided by the cumulative count of all
  shells at or inside it, which isolates inner-shell features from density
  changes in the outer shells.

A learned refiner can be slotted in behind ``describe_keypoints``; the
default refiner flattens the normalized grid unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np

from .errors import (
    DegeneratePatchError,
    InvalidArgumentError,
    NoDescriptorsError,
    PatchTooSparseError,
    ZeroPatchError,
)
from .geometry import PointCloud, SpatialIndex

_RADIUS_SLACK = 1e-9
_RANK_TOL = 1e-12
_AXIS_TOL = 1e-9

Refiner = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PatchParams:
    """Patch radius (meters) and spherical bin counts per dimension."""

    radius: float = 0.3
    bins_azimuth: int = 8
    bins_polar: int = 4
    bins_radial: int = 3

    def __post_init__(self):
        if self.radius <= 0:
            raise InvalidArgumentError(f"patch radius must be > 0, got {self.radius}")
        for name in ("bins_azimuth", "bins_polar", "bins_radial"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1, got {getattr(self, name)}")

    @property
    def dimension(self) -> int:
        return self.bins_azimuth * self.bins_polar * self.bins_radial


@dataclass(frozen=True)
class SphericalVoxelGrid:
    """Occupancy grid over a patch sphere, raw (counts) or normalized.

    Axes are (azimuth, polar, radial). A raw grid holds nonnegative integer
    counts summing to the patch cardinality; a normalized grid holds reals
    in [0, 1].
    """

    counts: np.ndarray
    normalized: bool
    center: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.float64)
        if counts.ndim != 3:
            raise InvalidArgumentError(f"grid must be 3-dimensional, got shape {counts.shape}")
        counts = counts.copy()
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def flatten(self) -> np.ndarray:
        return self.counts.ravel().copy()


@dataclass(frozen=True)
class VoxelDescriptor:
    """Flattened per-keypoint feature vector plus the keypoint it describes."""

    values: np.ndarray
    keypoint: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.size == 0:
            raise InvalidArgumentError("descriptor must have positive dimension")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("descriptor contains NaN or Inf")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "keypoint", np.asarray(self.keypoint, dtype=np.float64).reshape(3))


@dataclass(frozen=True)
class LocalFrame:
    """Orthonormal rotation mapping world coordinates into the patch frame."""

    rotation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        if rot.shape != (3, 3):
            raise InvalidArgumentError(f"frame must be 3x3, got {rot.shape}")
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > _AXIS_TOL:
            raise InvalidArgumentError("frame is not orthonormal within 1e-9")
        if abs(np.linalg.det(rot) - 1.0) > _AXIS_TOL:
            raise InvalidArgumentError("frame determinant is not +1 within 1e-9")
        object.__setattr__(self, "rotation", rot.copy())

    def to_frame(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T


def extract_patch(
    cloud: PointCloud,
    index: SpatialIndex,
    keypoint: np.ndarray,
    radius: float,
    min_patch_points: int = 8,
) -> PointCloud:
    """All cloud points within `radius` of `keypoint`, recentered on it.

    Raises PatchTooSparseError when fewer than `min_patch_points` neighbors
    exist; callers drop such keypoints.
    """
    keypoint = np.asarray(keypoint, dtype=np.float64).reshape(3)
    neighbors = index.radius_query(keypoint, radius)
    if neighbors.size < min_patch_points:
        raise PatchTooSparseError(
            f"patch has {neighbors.size} points, need at least {min_patch_points}"
        )
    return PointCloud(cloud.points[neighbors] - keypoint)


def _majority_sign(axis: np.ndarray, points: np.ndarray) -> np.ndarray:
    # Flip so the majority of points lie on the nonnegative side; exact ties
    # keep the current orientation.
    proj = points @ axis
    if np.count_nonzero(proj < 0) > np.count_nonzero(proj > 0):
        return -axis
    return axis


def compute_local_frame(patch: PointCloud) -> LocalFrame:
    """Deterministic local reference frame for a keypoint-centered patch.

    The z-axis is the smallest-eigenvalue eigenvector of the patch covariance,
    oriented so most points have nonnegative z. The x-axis is the patch
    centroid direction projected into the z-plane; when the centroid (or its
    projection) is within 1e-9 of zero, the largest-eigenvalue eigenvector is
    used instead, oriented by the same majority rule. y completes the
    right-handed frame.
    """
    pts = patch.points
    if len(patch) < 3:
        raise DegeneratePatchError(f"need >= 3 points for a frame, got {len(patch)}")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / len(patch)
    eigvals, eigvecs = np.linalg.eigh(cov)  # ascending eigenvalues
    if eigvals[1] <= _RANK_TOL:
        raise DegeneratePatchError("patch covariance has rank < 2")

    z = _majority_sign(eigvecs[:, 0], pts)

    x_ref = centroid - (centroid @ z) * z
    if np.linalg.norm(centroid) <= _AXIS_TOL or np.linalg.norm(x_ref) <= _AXIS_TOL:
        x_ref = _majority_sign(eigvecs[:, 2], pts)
        x_ref = x_ref - (x_ref @ z) * z
    x = x_ref / np.linalg.norm(x_ref)
    y = np.cross(z, x)
    return LocalFrame(np.stack([x, y, z]))


def _spherical_bins(local_pts: np.ndarray, params: PatchParams) -> tuple[np.ndarray, ...]:
    rho = np.linalg.norm(local_pts, axis=1)
    over = rho > params.radius + _RADIUS_SLACK
    if np.any(over):
        worst = float(rho.max())
        raise InvalidArgumentError(
            f"point at distance {worst:.6g} exceeds patch radius {params.radius}"
        )
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_polar = np.where(rho > 0, local_pts[:, 2] / np.where(rho > 0, rho, 1.0), 1.0)
    polar = np.arccos(np.clip(cos_polar, -1.0, 1.0))
    azimuth = np.arctan2(local_pts[:, 1], local_pts[:, 0])
    azimuth = np.where(azimuth < 0, azimuth + 2.0 * np.pi, azimuth)

    n_az, n_po, n_ra = params.bins_azimuth, params.bins_polar, params.bins_radial
    # Uniform bins; domain maxima clamp into the last bin, azimuth wraps.
    bin_az = np.floor(azimuth * n_az / (2.0 * np.pi)).astype(np.intp) % n_az
    bin_po = np.minimum(np.floor(polar * n_po / np.pi).astype(np.intp), n_po - 1)
    bin_ra = np.minimum(np.floor(rho * n_ra / params.radius).astype(np.intp), n_ra - 1)
    return bin_az, bin_po, bin_ra


def spherical_voxelize(patch: PointCloud, frame: LocalFrame, params: PatchParams) -> SphericalVoxelGrid:
    """Count patch points per spherical voxel in the local frame.

    Points are mapped into the frame, converted to (azimuth in [0, 2pi),
    polar in [0, pi], rho in [0, radius]) and binned uniformly per dimension.
    Every patch point must lie within the patch radius (1e-9 slack).
    """
    shape = (params.bins_azimuth, params.bins_polar, params.bins_radial)
    grid = np.zeros(shape, dtype=np.float64)
    if len(patch) > 0:
        local = frame.to_frame(patch.points)
        bins = _spherical_bins(local, params)
        np.add.at(grid, bins, 1.0)
    return SphericalVoxelGrid(grid, normalized=False, center=np.zeros(3))


def cube_voxelize(patch: PointCloud, frame: LocalFrame, params: PatchParams) -> SphericalVoxelGrid:
    """Axis-aligned cube-grid fallback with the same bin layout and interface.

    Exists for the ablation that swaps out spherical voxels: the enclosing
    cube [-r, r]^3 is split into bins_azimuth x bins_polar x bins_radial cells
    so downstream stages see identically shaped grids.
    """
    shape = (params.bins_azimuth, params.bins_polar, params.bins_radial)
    grid = np.zeros(shape, dtype=np.float64)
    if len(patch) > 0:
        local = frame.to_frame(patch.points)
        rho = np.linalg.norm(local, axis=1)
        if np.any(rho > params.radius + _RADIUS_SLACK):
            raise InvalidArgumentError(
                f"point at distance {float(rho.max()):.6g} exceeds patch radius {params.radius}"
            )
        r = params.radius
        bins = []
        for axis, n_bins in zip(range(3), shape):
            b = np.floor((local[:, axis] + r) * n_bins / (2.0 * r)).astype(np.intp)
            bins.append(np.clip(b, 0, n_bins - 1))
        np.add.at(grid, tuple(bins), 1.0)
    return SphericalVoxelGrid(grid, normalized=False, center=np.zeros(3))


def normalize_whole(grid: SphericalVoxelGrid) -> SphericalVoxelGrid:
    """Divide every bin by the grand total so entries sum to 1."""
    if grid.normalized:
        raise InvalidArgumentError("grid is already normalized")
    total = grid.total
    if total <= 0:
        raise ZeroPatchError("cannot normalize a grid with zero total count")
    return SphericalVoxelGrid(grid.counts / total, normalized=True, center=grid.center)


def normalize_multiscale(grid: SphericalVoxelGrid) -> SphericalVoxelGrid:
    """Divide each radial shell by the cumulative count of shells inside it.

    Shell k is divided by the total mass of shells 1..k, so inner-shell
    features are bitwise unaffected by any change confined to outer shells.
    Shells whose cumulative count is zero map to zero.
    """
    if grid.normalized:
        raise InvalidArgumentError("grid is already normalized")
    shell_totals = grid.counts.sum(axis=(0, 1))
    cumulative = np.cumsum(shell_totals)
    scale = np.where(cumulative > 0, 1.0 / np.where(cumulative > 0, cumulative, 1.0), 0.0)
    return SphericalVoxelGrid(grid.counts * scale[None, None, :], normalized=True, center=grid.center)


def azimuth_canonicalize(grid: SphericalVoxelGrid) -> SphericalVoxelGrid:
    """Rotate the grid about its polar axis into a canonical azimuth.

    The grid is circularly shifted along the azimuth axis so the slice with
    maximal total mass lands at index 0. Ties are resolved by comparing the
    shifted grids lexicographically (then by smallest shift), which makes the
    result constant on azimuth-rotation orbits and idempotent.
    """
    if not grid.normalized:
        raise InvalidArgumentError("canonicalize expects a normalized grid")
    slice_mass = grid.counts.sum(axis=(1, 2))
    best = np.flatnonzero(slice_mass == slice_mass.max())
    shift = int(best[0])
    if best.size > 1:
        keys = {int(s): np.roll(grid.counts, -int(s), axis=0).ravel() for s in best}
        shift = min(keys, key=lambda s: (tuple(keys[s]), s))
    rolled = np.roll(grid.counts, -shift, axis=0)
    return SphericalVoxelGrid(rolled, normalized=True, center=grid.center)


def azimuth_spectrum_refiner(grid: np.ndarray) -> np.ndarray:
    """DFT magnitudes along the azimuth axis, flattened.

    Exactly invariant to circular azimuth shifts of the grid, and stable when
    the local frame's azimuth reference wobbles on symmetric patches, where
    shift canonicalization is noise-driven. Keeps the descriptor dimension.
    """
    return np.abs(np.fft.fft(np.asarray(grid, dtype=np.float64), axis=0)).ravel()


REFINERS: dict[str, Refiner | None] = {
    "identity": None,
    "azimuth_spectrum": azimuth_spectrum_refiner,
}


def describe_keypoints(
    cloud: PointCloud,
    keypoints: np.ndarray,
    params: PatchParams,
    mode: Literal["whole", "multiscale"] = "multiscale",
    canonicalize: bool = True,
    *,
    min_patch_points: int = 8,
    voxel_mode: Literal["sphere", "cube"] = "sphere",
    refiner: Refiner | None = None,
    index: SpatialIndex | None = None,
) -> tuple[list[VoxelDescriptor], list[int]]:
    """Describe each keypoint: patch -> frame -> voxelize -> normalize -> flatten.

    Returns the descriptors plus the indices of the keypoints that survived.
    Keypoints whose patch is too sparse or degenerate are skipped; if every
    keypoint is dropped, NoDescriptorsError is raised. Descriptors are ordered
    by input keypoint index.
    """
    if mode not in ("whole", "multiscale"):
        raise InvalidArgumentError(f"unknown normalization mode {mode!r}")
    if voxel_mode not in ("sphere", "cube"):
        raise InvalidArgumentError(f"unknown voxel mode {voxel_mode!r}")
    keypoints = np.asarray(keypoints, dtype=np.float64).reshape(-1, 3)
    if index is None:
        index = SpatialIndex(cloud)
    voxelize = spherical_voxelize if voxel_mode == "sphere" else cube_voxelize
    normalize = normalize_whole if mode == "whole" else normalize_multiscale

    descriptors: list[VoxelDescriptor] = []
    kept: list[int] = []
    for i, keypoint in enumerate(keypoints):
        try:
            patch = extract_patch(cloud, index, keypoint, params.radius, min_patch_points)
            frame = compute_local_frame(patch)
            grid = normalize(voxelize(patch, frame, params))
        except (PatchTooSparseError, DegeneratePatchError, ZeroPatchError):
            continue
        if canonicalize:
            grid = azimuth_canonicalize(grid)
        values = grid.flatten() if refiner is None else np.asarray(refiner(grid.counts))
        descriptors.append(VoxelDescriptor(values, keypoint))
        kept.append(i)
    if not descriptors:
        raise NoDescriptorsError("every keypoint was dropped (sparse or degenerate patches)")
    return descriptors, kept


def as_feature_matrix(descriptors: Sequence[VoxelDescriptor] | np.ndarray) -> np.ndarray:
    """Stack descriptors into an (n, d) float64 matrix."""
    if isinstance(descriptors, np.ndarray):
        mat = np.asarray(descriptors, dtype=np.float64)
        if mat.ndim != 2:
            raise InvalidArgumentError(f"feature matrix must be 2-D, got shape {mat.shape}")
        return mat
    if len(descriptors) == 0:
        raise InvalidArgumentError("empty descriptor list")
    return np.stack([d.values for d in descriptors]).astype(np.float64)


def keypoint_matrix(descriptors: Sequence[VoxelDescriptor]) -> np.ndarray:
    """Stack descriptor keypoints into an (n, 3) matrix."""
    return np.stack([d.keypoint for d in descriptors]).astype(np.float64)

"""Synthetic cross-source pair generation and procedural base clouds.

A pair is built from one base cloud: the source is an independently
voxel-downsampled, noised copy; the target additionally gets the ground-truth
transform applied first and an optional half-space crop for partial overlap.
The two downsampling voxel edges are drawn independently from a uniform
distribution (default U(0, 0.1) meters), which is what simulates the density
mismatch between sensors.

Procedural base clouds are seeded samplers over composite surfaces (planes,
boxes, spheres), so benchmarks need no dataset downloads; PLY paths are
accepted wherever a generator name is.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidArgumentError, SpecTooAggressiveError
from .geometry import PointCloud, RigidTransform, apply_transform, voxel_downsample
from .matching import CorrespondenceSet

_MIN_PAIR_POINTS = 100


@dataclass(frozen=True)
class SyntheticPairSpec:
    """Everything needed to deterministically build one registration pair."""

    seed: int = 0
    base: str = "corner_room"
    base_points: int = 20_000
    rotation_max_deg: float = 60.0
    translation_max: float = 1.0
    downsample_range: tuple[float, float] = (0.0, 0.1)
    noise_sigma: float = 0.005
    crop_fraction: float = 1.0
    gt_pair_max_dist: float = 0.1

    def __post_init__(self):
        lo, hi = self.downsample_range
        if not 0 <= lo <= hi:
            raise InvalidArgumentError(f"bad downsample range {self.downsample_range}")
        if not 0 < self.crop_fraction <= 1:
            raise InvalidArgumentError(f"crop_fraction must be in (0, 1], got {self.crop_fraction}")
        if self.noise_sigma < 0:
            raise InvalidArgumentError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.base_points < _MIN_PAIR_POINTS:
            raise InvalidArgumentError(f"base_points must be >= {_MIN_PAIR_POINTS}")
        object.__setattr__(self, "downsample_range", (float(lo), float(hi)))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "base": self.base,
            "base_points": self.base_points,
            "rotation_max_deg": self.rotation_max_deg,
            "translation_max": self.translation_max,
            "downsample_range": list(self.downsample_range),
            "noise_sigma": self.noise_sigma,
            "crop_fraction": self.crop_fraction,
            "gt_pair_max_dist": self.gt_pair_max_dist,
        }

    @staticmethod
    def from_dict(data: dict) -> "SyntheticPairSpec":
        known = set(SyntheticPairSpec.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"unknown pair spec keys: {sorted(unknown)}")
        if "downsample_range" in data:
            data = dict(data, downsample_range=tuple(data["downsample_range"]))
        return SyntheticPairSpec(**data)


@dataclass(frozen=True)
class PairParameters:
    """The scalar draws behind one pair, exposed for diagnostics and tests."""

    side_source: float
    side_target: float
    transform: RigidTransform
    crop_normal: np.ndarray


# --- procedural surface samplers -------------------------------------------


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = _unit(np.asarray(axis, dtype=np.float64))
    x, y, z = axis
    skew = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle) * skew + (1.0 - np.cos(angle)) * (skew @ skew)


class _Surface:
    def __init__(self, area: float, sampler):
        self.area = area
        self.sampler = sampler


def _rect(origin, edge_u, edge_v) -> _Surface:
    origin = np.asarray(origin, dtype=np.float64)
    edge_u = np.asarray(edge_u, dtype=np.float64)
    edge_v = np.asarray(edge_v, dtype=np.float64)
    area = float(np.linalg.norm(np.cross(edge_u, edge_v)))

    def sample(rng, count):
        uv = rng.uniform(size=(count, 2))
        return origin + uv[:, :1] * edge_u + uv[:, 1:] * edge_v

    return _Surface(area, sample)


def _sphere(center, radius: float) -> _Surface:
    center = np.asarray(center, dtype=np.float64)

    def sample(rng, count):
        direction = rng.normal(size=(count, 3))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        return center + radius * direction

    return _Surface(4.0 * np.pi * radius**2, sample)


def _box(center, half_sizes, yaw: float) -> list[_Surface]:
    center = np.asarray(center, dtype=np.float64)
    hx, hy, hz = half_sizes
    rot = _rotation_about_axis([0.0, 0.0, 1.0], yaw)
    faces = []
    # Each face: corner origin plus two spanning edges, rotated about z.
    corners_edges = [
        ([-hx, -hy, hz], [2 * hx, 0, 0], [0, 2 * hy, 0]),   # top
        ([-hx, -hy, -hz], [2 * hx, 0, 0], [0, 2 * hy, 0]),  # bottom
        ([-hx, -hy, -hz], [0, 2 * hy, 0], [0, 0, 2 * hz]),  # -x
        ([hx, -hy, -hz], [0, 2 * hy, 0], [0, 0, 2 * hz]),   # +x
        ([-hx, -hy, -hz], [2 * hx, 0, 0], [0, 0, 2 * hz]),  # -y
        ([-hx, hy, -hz], [2 * hx, 0, 0], [0, 0, 2 * hz]),   # +y
    ]
    for origin, eu, ev in corners_edges:
        faces.append(
            _rect(center + rot @ np.asarray(origin, float),
                  rot @ np.asarray(eu, float),
                  rot @ np.asarray(ev, float))
        )
    return faces


def _sample_surfaces(surfaces: list[_Surface], n_points: int, rng) -> np.ndarray:
    areas = np.array([s.area for s in surfaces])
    choice = rng.choice(len(surfaces), size=n_points, p=areas / areas.sum())
    chunks = []
    for i, surface in enumerate(surfaces):
        count = int(np.count_nonzero(choice == i))
        if count:
            chunks.append(surface.sampler(rng, count))
    return np.vstack(chunks)


def _corner_room(n_points: int, rng) -> np.ndarray:
    surfaces = [
        _rect([0, 0, 0], [3, 0, 0], [0, 3, 0]),   # floor
        _rect([0, 0, 0], [3, 0, 0], [0, 0, 2]),   # wall along x
        _rect([0, 0, 0], [0, 3, 0], [0, 0, 2]),   # wall along y
    ]
    for _ in range(int(rng.integers(4, 7))):
        half = rng.uniform(0.10, 0.35, size=3)
        center = [rng.uniform(0.6, 2.4), rng.uniform(0.6, 2.4), half[2]]
        surfaces.extend(_box(center, half, rng.uniform(0, 2 * np.pi)))
    for _ in range(int(rng.integers(2, 4))):
        radius = rng.uniform(0.12, 0.3)
        center = [rng.uniform(0.5, 2.5), rng.uniform(0.5, 2.5), rng.uniform(radius, 0.9)]
        surfaces.append(_sphere(center, radius))
    return _sample_surfaces(surfaces, n_points, rng)


def _block_pile(n_points: int, rng) -> np.ndarray:
    surfaces = [_rect([0, 0, 0], [4, 0, 0], [0, 4, 0])]
    for _ in range(int(rng.integers(8, 13))):
        half = rng.uniform(0.08, 0.4, size=3)
        center = [rng.uniform(0.5, 3.5), rng.uniform(0.5, 3.5), half[2] * rng.uniform(1.0, 2.5)]
        surfaces.extend(_box(center, half, rng.uniform(0, 2 * np.pi)))
    for _ in range(int(rng.integers(2, 5))):
        radius = rng.uniform(0.1, 0.35)
        center = [rng.uniform(0.5, 3.5), rng.uniform(0.5, 3.5), rng.uniform(radius, 1.2)]
        surfaces.append(_sphere(center, radius))
    return _sample_surfaces(surfaces, n_points, rng)


GENERATORS = {
    "corner_room": _corner_room,
    "block_pile": _block_pile,
}


def procedural_cloud(kind: str, n_points: int, seed) -> PointCloud:
    """Seeded composite-surface cloud; `seed` may be an int or SeedSequence."""
    if kind not in GENERATORS:
        raise InvalidArgumentError(
            f"unknown generator {kind!r}; options: {sorted(GENERATORS)}"
        )
    rng = np.random.default_rng(seed)
    return PointCloud(GENERATORS[kind](n_points, rng))


def _load_base(spec: SyntheticPairSpec, seed) -> PointCloud:
    if spec.base in GENERATORS:
        return procedural_cloud(spec.base, spec.base_points, seed)
    if os.path.exists(spec.base):
        from .ply_io import read_point_cloud

        return read_point_cloud(spec.base)
    raise InvalidArgumentError(
        f"base {spec.base!r} is neither a generator name nor an existing file"
    )


# --- pair construction ------------------------------------------------------


def pair_parameters(spec: SyntheticPairSpec) -> PairParameters:
    """Draw the per-pair random parameters (deterministic in spec.seed)."""
    params_seed = np.random.SeedSequence(spec.seed).spawn(4)[1]
    rng = np.random.default_rng(params_seed)
    lo, hi = spec.downsample_range
    side_source = float(rng.uniform(lo, hi))
    side_target = float(rng.uniform(lo, hi))

    axis = _unit(rng.normal(size=3))
    angle = float(rng.uniform(0.0, np.radians(spec.rotation_max_deg)))
    direction = _unit(rng.normal(size=3))
    magnitude = float(rng.uniform(0.0, spec.translation_max))
    transform = RigidTransform(_rotation_about_axis(axis, angle), magnitude * direction)

    crop_normal = _unit(rng.normal(size=3))
    return PairParameters(side_source, side_target, transform, crop_normal)


def _add_noise(cloud: PointCloud, sigma: float, seed) -> PointCloud:
    rng = np.random.default_rng(seed)
    return PointCloud(cloud.points + rng.normal(scale=sigma, size=cloud.points.shape))


def _crop_fraction(cloud: PointCloud, normal: np.ndarray, fraction: float) -> PointCloud:
    if fraction >= 1.0:
        return cloud
    keep = int(np.ceil(fraction * len(cloud)))
    projection = cloud.points @ normal
    order = np.argsort(projection, kind="stable")[:keep]
    return cloud.select(np.sort(order))


def _ground_truth_pairs(
    source: PointCloud, target: PointCloud, gt: RigidTransform, max_dist: float
) -> CorrespondenceSet:
    moved = gt.apply(source.points)
    dist_fwd, to_target = cKDTree(target.points).query(moved)
    _, back_to_source = cKDTree(moved).query(target.points)
    idx = np.arange(len(source))
    mutual = (back_to_source[to_target] == idx) & (dist_fwd <= max_dist)
    rows = idx[mutual]
    return CorrespondenceSet(
        source.points[rows], target.points[to_target[rows]], np.ones(rows.size)
    )


def generate_pair(
    spec: SyntheticPairSpec,
) -> tuple[PointCloud, PointCloud, RigidTransform, CorrespondenceSet]:
    """Build (source, target, ground-truth transform, ground-truth pairs).

    source = noise(downsample_A(base)); target = crop(noise(downsample_B(
    gt(base)))) with A, B drawn independently. Ground-truth pairs are the
    mutual nearest neighbors between the transformed source and the target
    within `gt_pair_max_dist`. Fully determined by spec.seed.
    """
    seeds = np.random.SeedSequence(spec.seed).spawn(4)
    params = pair_parameters(spec)
    base = _load_base(spec, seeds[0])

    source = _add_noise(voxel_downsample(base, params.side_source), spec.noise_sigma, seeds[2])
    target = apply_transform(base, params.transform)
    target = _add_noise(voxel_downsample(target, params.side_target), spec.noise_sigma, seeds[3])
    target = _crop_fraction(target, params.crop_normal, spec.crop_fraction)

    if len(source) < _MIN_PAIR_POINTS or len(target) < _MIN_PAIR_POINTS:
        raise SpecTooAggressiveError(
            f"pair spec left {len(source)} source / {len(target)} target points "
            f"(need {_MIN_PAIR_POINTS})"
        )
    gt_pairs = _ground_truth_pairs(source, target, params.transform, spec.gt_pair_max_dist)
    return source, target, params.transform, gt_pairs

"""End-to-end registration pipeline with ablation toggles.

Stage order: farthest-point keypoints -> spherical-voxel descriptors ->
similarity matching (soft top-k or mutual NN) -> optional hierarchical
correspondence filtering -> rigid transform estimation. Every stage seed is
derived from the single master seed, so a run is reproducible end to end.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .descriptor import REFINERS, PatchParams, describe_keypoints, keypoint_matrix
from .errors import CrossRegError, InvalidArgumentError, RegistrationFailedError
from .estimation import EstimatorConfig, estimate
from .filtering import FilterConfig, FilterTrace, hierarchical_filter
from .geometry import PointCloud, RigidTransform, farthest_point_sample
from .matching import (
    CorrespondenceSet,
    cosine_similarity_matrix,
    dual_softmax,
    mutual_nearest_neighbor,
    topk_correspondences,
)
from .metrics import MetricThresholds

_STAGE_TAGS = {"fps_source": 1, "fps_target": 2, "estimation": 3}


@dataclass(frozen=True)
class PipelineConfig:
    """Every pipeline tunable, including the ablation toggles.

    Toggles map onto the ablation axes: `spherical_voxels` (cube-grid
    fallback when off), `normalization` (multiscale vs whole-sphere),
    `matcher` (soft top-k vs mutual NN), and `hcf_enabled` (hierarchical
    filtering on/off).
    """

    seed: int = 0
    keypoints: int = 2048
    min_patch_points: int = 8
    normalization: str = "multiscale"
    canonicalize: bool = True
    refiner: str = "azimuth_spectrum"
    spherical_voxels: bool = True
    matcher: str = "soft_topk"
    matcher_k: int = 5000
    softmax_temperature: float = 1.0
    hcf_enabled: bool = True
    patch: PatchParams = field(default_factory=PatchParams)
    filtering: FilterConfig = field(default_factory=FilterConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    thresholds: MetricThresholds = field(default_factory=MetricThresholds)

    def __post_init__(self):
        if self.seed < 0:
            raise InvalidArgumentError(f"seed must be >= 0, got {self.seed}")
        if self.keypoints < 1:
            raise InvalidArgumentError(f"keypoints must be >= 1, got {self.keypoints}")
        if self.min_patch_points < 3:
            raise InvalidArgumentError(
                f"min_patch_points must be >= 3, got {self.min_patch_points}"
            )
        if self.normalization not in ("whole", "multiscale"):
            raise InvalidArgumentError(f"unknown normalization {self.normalization!r}")
        if self.refiner not in REFINERS:
            raise InvalidArgumentError(
                f"unknown refiner {self.refiner!r}; options: {sorted(REFINERS)}"
            )
        if self.matcher not in ("soft_topk", "mnn"):
            raise InvalidArgumentError(f"unknown matcher {self.matcher!r}")
        if self.matcher_k < 1:
            raise InvalidArgumentError(f"matcher_k must be >= 1, got {self.matcher_k}")
        if self.softmax_temperature <= 0:
            raise InvalidArgumentError(
                f"softmax_temperature must be > 0, got {self.softmax_temperature}"
            )


@dataclass(frozen=True)
class PipelineResult:
    """Transform plus the correspondence evidence behind it.

    `correspondences` is the set handed to the estimator;
    `initial_correspondences` is the matcher output before filtering (the two
    coincide when filtering is disabled). `timings` maps stage name to
    seconds.
    """

    transform: RigidTransform
    correspondences: CorrespondenceSet
    initial_correspondences: CorrespondenceSet
    trace: FilterTrace
    timings: dict


def derive_seed(master: int, tag: int) -> int:
    """Stable per-stage seed derived from the master seed."""
    return int(np.random.SeedSequence([master, tag]).generate_state(1)[0])


def run_pipeline(
    source: PointCloud, target: PointCloud, config: PipelineConfig
) -> PipelineResult:
    """Register `source` onto `target`; q ~= transform(p) for true pairs.

    Raises InvalidArgumentError when a cloud has fewer points than the
    keypoint budget, and RegistrationFailedError (naming the stage, carrying
    any partial filter trace) when a stage fails.
    """
    for name, cloud in (("source", source), ("target", target)):
        if len(cloud) < config.keypoints:
            raise InvalidArgumentError(
                f"{name} cloud has {len(cloud)} points, fewer than "
                f"keypoints={config.keypoints}"
            )
    timings: dict[str, float] = {}
    trace = FilterTrace()

    def _run(stage: str, fn, *args, trace_so_far=None):
        start = time.perf_counter()
        try:
            result = fn(*args)
        except CrossRegError as exc:
            raise RegistrationFailedError(stage, exc, trace=trace_so_far) from exc
        timings[stage] = time.perf_counter() - start
        return result

    def _keypoints():
        src_idx = farthest_point_sample(
            source, config.keypoints, derive_seed(config.seed, _STAGE_TAGS["fps_source"])
        )
        tgt_idx = farthest_point_sample(
            target, config.keypoints, derive_seed(config.seed, _STAGE_TAGS["fps_target"])
        )
        return source.points[src_idx], target.points[tgt_idx]

    src_keypoints, tgt_keypoints = _run("keypoints", _keypoints)

    def _describe():
        voxel_mode = "sphere" if config.spherical_voxels else "cube"
        refiner = REFINERS[config.refiner]
        src_desc, _ = describe_keypoints(
            source,
            src_keypoints,
            config.patch,
            mode=config.normalization,
            canonicalize=config.canonicalize,
            min_patch_points=config.min_patch_points,
            voxel_mode=voxel_mode,
            refiner=refiner,
        )
        tgt_desc, _ = describe_keypoints(
            target,
            tgt_keypoints,
            config.patch,
            mode=config.normalization,
            canonicalize=config.canonicalize,
            min_patch_points=config.min_patch_points,
            voxel_mode=voxel_mode,
            refiner=refiner,
        )
        return src_desc, tgt_desc

    src_desc, tgt_desc = _run("descriptors", _describe)

    def _match():
        similarity = cosine_similarity_matrix(src_desc, tgt_desc)
        src_pts = keypoint_matrix(src_desc)
        tgt_pts = keypoint_matrix(tgt_desc)
        if config.matcher == "mnn":
            return mutual_nearest_neighbor(similarity, src_pts, tgt_pts)
        assignment = dual_softmax(similarity, config.softmax_temperature)
        k = min(config.matcher_k, assignment.size)
        return topk_correspondences(assignment, src_pts, tgt_pts, k)

    initial = _run("matching", _match)

    correspondences = initial
    if config.hcf_enabled:
        correspondences, trace = _run(
            "filtering", hierarchical_filter, initial, config.filtering
        )

    estimator = replace(
        config.estimator, seed=derive_seed(config.seed, _STAGE_TAGS["estimation"])
    )
    transform = _run(
        "estimation", estimate, correspondences, trace, estimator, trace_so_far=trace
    )
    return PipelineResult(transform, correspondences, initial, trace, timings)

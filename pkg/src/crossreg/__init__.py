"""Cross-source point cloud registration toolkit.

Pipeline: spherical-voxel keypoint descriptors (density invariant via
multi-scale sphere normalization), soft correspondence generation, hierarchical
second-order-consistency filtering, and rigid transform estimation, plus
evaluation metrics and a synthetic cross-source benchmark harness.
"""

from .descriptor import (
    REFINERS,
    LocalFrame,
    PatchParams,
    SphericalVoxelGrid,
    VoxelDescriptor,
    azimuth_canonicalize,
    azimuth_spectrum_refiner,
    compute_local_frame,
    cube_voxelize,
    describe_keypoints,
    extract_patch,
    normalize_multiscale,
    normalize_whole,
    spherical_voxelize,
)
from .errors import (
    ConfigError,
    CrossRegError,
    DegeneratePatchError,
    EstimationDegenerateError,
    EstimationFailedError,
    InvalidArgumentError,
    NoDescriptorsError,
    PatchTooSparseError,
    PlyParseError,
    RegistrationFailedError,
    SpecTooAggressiveError,
    TooFewCorrespondencesError,
    ZeroPatchError,
)
from .estimation import EstimatorConfig, estimate, ransac, weighted_svd
from .filtering import (
    FilterConfig,
    FilterTrace,
    consistency_distance,
    filter_layer,
    hierarchical_filter,
    second_order_scores,
)
from .geometry import (
    PointCloud,
    RigidTransform,
    SpatialIndex,
    apply_transform,
    farthest_point_sample,
    radius_neighbors,
    voxel_downsample,
)
from .matching import (
    CorrespondenceSet,
    cosine_similarity_matrix,
    dual_softmax,
    mutual_nearest_neighbor,
    topk_correspondences,
)
from .metrics import (
    MetricThresholds,
    PairEvaluation,
    correspondence_rmse,
    feature_matching_recall,
    inlier_ratio,
    registration_recall,
    rotation_error,
    translation_error,
)
from .benchmark import BenchmarkReport, run_benchmark
from .pipeline import PipelineConfig, PipelineResult, run_pipeline
from .ply_io import read_point_cloud, write_correspondence_visualization, write_point_cloud
from .synthetic import SyntheticPairSpec, generate_pair, procedural_cloud

__version__ = "0.1.0"

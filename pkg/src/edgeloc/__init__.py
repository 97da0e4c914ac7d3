"""edgeloc: monocular localization against compact semantic line-segment maps.

A camera pose is refined by reprojecting 3D landmark edge samples into
per-label Euclidean distance transforms of detected semantic edges and
minimizing the summed squared distances with damped Gauss-Newton on SE(3).
"""

from .alignment import AlignmentProblem, AlignmentResult, align_frame, solve, solve_two_scale, validate
from .compact_map import (
    CompactMap,
    LineSegmentLandmark,
    MapFormatError,
    SemanticLabel,
    WireframeLandmark,
    map_statistics,
    parse_map,
    serialize_map,
)
from .config import PipelineConfig, parse_config_text
from .edge_features import (
    SemanticEdgeField,
    SemanticEdgeMask,
    build_edge_masks,
    build_field,
    build_fields,
    coarsen_mask,
    distance_transform,
    gradients,
    sample_field,
)
from .evaluation import ErrorReport, evaluate_trajectories
from .geometry import CameraIntrinsics, Pose, compose, exp, inverse, log, project, skew
from .pipeline import DatasetManifest, FrameRecord, run_dataset
from .predictor import PosePredictor
from .selection import LandmarkSamples, select_landmarks
from .synthetic import NoiseConfig, SyntheticScene, generate_scene, render_frame, write_dataset

__version__ = "0.1.0"

__all__ = [
    "AlignmentProblem",
    "AlignmentResult",
    "CameraIntrinsics",
    "CompactMap",
    "DatasetManifest",
    "ErrorReport",
    "FrameRecord",
    "LandmarkSamples",
    "LineSegmentLandmark",
    "MapFormatError",
    "NoiseConfig",
    "PipelineConfig",
    "Pose",
    "PosePredictor",
    "SemanticEdgeField",
    "SemanticEdgeMask",
    "SemanticLabel",
    "SyntheticScene",
    "WireframeLandmark",
    "align_frame",
    "build_edge_masks",
    "build_field",
    "build_fields",
    "coarsen_mask",
    "compose",
    "distance_transform",
    "evaluate_trajectories",
    "exp",
    "generate_scene",
    "gradients",
    "inverse",
    "log",
    "map_statistics",
    "parse_config_text",
    "parse_map",
    "project",
    "render_frame",
    "run_dataset",
    "sample_field",
    "select_landmarks",
    "serialize_map",
    "skew",
    "solve",
    "solve_two_scale",
    "validate",
]

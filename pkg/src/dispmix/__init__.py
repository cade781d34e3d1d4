"""Ground-truth distribution modeling for stereo disparity supervision.

Per-pixel probability distributions predicted by an ensemble of stereo
matchers are decomposed into parameterized Laplacian modes, clustered in
parameter space to keep only knowledge corroborated across members, fused
with the disparity label and re-rendered as a normalized
mixture-of-Laplacians supervision signal.
"""

from .clustering import ClusterConfig, ClusterOutcome, ParameterPoint, cluster_mu
from .errors import (
    ConfigError,
    DataError,
    DegenerateDistributionError,
    DispmixError,
    EmptyMixtureError,
    FormatError,
    InvalidParameterError,
    UndefinedMetricError,
)
from .estimation import dme_estimate, infer_volume, soft_argmin
from .io_formats import (
    PixelModes,
    read_pfm,
    read_pgm,
    read_volume,
    write_modes_json,
    write_pfm,
    write_pgm,
    write_volume,
)
from .metrics import (
    LOG_CLAMP,
    MetricThreshold,
    cross_entropy,
    cross_entropy_map,
    end_point_error,
    mean_cross_entropy,
    outlier_rate,
    unimodal_gt,
)
from .modeling import (
    PixelMixture,
    collect_parameter_points,
    fuse_clusters,
    model_ground_truth,
    model_ground_truth_volume,
    render_mixture,
    superimpose_average,
)
from .separation import SeparationConfig, reconstruct_from_modes, separate_modes
from .synth import (
    PerturbSpec,
    Scene,
    SceneSpec,
    block_match,
    brute_force_dbscan,
    gen_scene,
    perturb_ensemble,
    shifted_texture_pair,
    stripe_pair,
)
from .types import (
    B_MIN,
    DiscreteDistribution,
    DisparityMap,
    EnsembleVolumes,
    GroundTruthMixture,
    LabelAnchor,
    LaplaceMode,
    ProbabilityVolume,
    evaluate_laplacian,
    normalize_distribution,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "B_MIN",
    "LOG_CLAMP",
    "ClusterConfig",
    "ClusterOutcome",
    "ConfigError",
    "DataError",
    "DegenerateDistributionError",
    "DiscreteDistribution",
    "DisparityMap",
    "DispmixError",
    "EmptyMixtureError",
    "EnsembleVolumes",
    "FormatError",
    "GroundTruthMixture",
    "InvalidParameterError",
    "LabelAnchor",
    "LaplaceMode",
    "MetricThreshold",
    "ParameterPoint",
    "PerturbSpec",
    "PixelMixture",
    "PixelModes",
    "ProbabilityVolume",
    "Scene",
    "SceneSpec",
    "SeparationConfig",
    "UndefinedMetricError",
    "block_match",
    "brute_force_dbscan",
    "cluster_mu",
    "collect_parameter_points",
    "cross_entropy",
    "cross_entropy_map",
    "dme_estimate",
    "end_point_error",
    "evaluate_laplacian",
    "fuse_clusters",
    "gen_scene",
    "infer_volume",
    "mean_cross_entropy",
    "model_ground_truth",
    "model_ground_truth_volume",
    "normalize_distribution",
    "outlier_rate",
    "perturb_ensemble",
    "read_pfm",
    "read_pgm",
    "read_volume",
    "reconstruct_from_modes",
    "render_mixture",
    "separate_modes",
    "shifted_texture_pair",
    "soft_argmin",
    "stripe_pair",
    "superimpose_average",
    "unimodal_gt",
    "write_modes_json",
    "write_pfm",
    "write_pgm",
    "write_volume",
]

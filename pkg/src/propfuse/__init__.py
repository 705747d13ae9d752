"""Bayesian fusion of confidence-weighted material observations into
calibrated per-material property distributions, 3D property fields, and
object-level estimates such as mass."""

__version__ = "0.1.0"

from .core import (
    Confidence,
    MaterialLibrary,
    Observation,
    PropertyKind,
    PropertyPrior,
    ValidationReport,
    validate_observation,
)
from .dirichlet import DirichletBelief
from .errors import (
    NoEvidenceError,
    NumericDomainError,
    PropfuseError,
    SnapshotError,
    UndefinedMomentsError,
    ValidationError,
)
from .field import (
    MassEstimate,
    MaterialMap,
    SemanticPointField,
    VoxelGrid,
    export_material_map,
    integrate_mass,
    voxelize,
)
from .ingest import ObservationRecord, ParseIssue, parse_observation_lines, read_observations
from .metrics import MetricReport, evaluate, pair_metrics
from .mixture import MixturePredictive, build_mixture, mixture_total_uncertainty
from .moments import GaussianPosterior, WeightedMoments
from .nig import NigBelief, UncertaintyReport
from .pointcloud import PointCloud, SplatPoint, load_pointcloud, save_ply
from .session import FusionConfig, FusionSession
from .synthetic import (
    CoverageTable,
    Scene,
    SceneSpec,
    calibration_score,
    emit_observations,
    sample_scene,
)

__all__ = [
    "Confidence",
    "CoverageTable",
    "DirichletBelief",
    "FusionConfig",
    "FusionSession",
    "GaussianPosterior",
    "MassEstimate",
    "MaterialLibrary",
    "MaterialMap",
    "MetricReport",
    "MixturePredictive",
    "NigBelief",
    "NoEvidenceError",
    "NumericDomainError",
    "Observation",
    "ObservationRecord",
    "ParseIssue",
    "PointCloud",
    "PropertyKind",
    "PropertyPrior",
    "PropfuseError",
    "Scene",
    "SceneSpec",
    "SemanticPointField",
    "SnapshotError",
    "SplatPoint",
    "UncertaintyReport",
    "UndefinedMomentsError",
    "ValidationError",
    "ValidationReport",
    "VoxelGrid",
    "WeightedMoments",
    "build_mixture",
    "calibration_score",
    "emit_observations",
    "evaluate",
    "export_material_map",
    "integrate_mass",
    "load_pointcloud",
    "mixture_total_uncertainty",
    "pair_metrics",
    "parse_observation_lines",
    "read_observations",
    "sample_scene",
    "save_ply",
    "validate_observation",
    "voxelize",
]

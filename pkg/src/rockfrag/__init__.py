"""rockfrag: rock fragmentation analysis from pile imagery.

Converts images of fragmented-rock piles into particle size distributions,
fits the Swebrec size-distribution model, computes the standard accuracy
metrics and characteristic sizes, and runs streaming survey missions with a
t-test stopping rule — all validated against a built-in synthetic pile
generator with known ground truth.
"""

from .distribution import (
    CharacteristicSizes,
    SieveAnalysis,
    SieveRecord,
    SizeDistribution,
    average_log_error,
    characteristic_size,
    characteristic_sizes,
    log_size_error,
    mass_passing_curve,
    percent_difference,
    percent_passing_at,
    percent_true_error,
    pool_distributions,
    sieve_to_distribution,
)
from .mission import (
    FrameResult,
    MissionRunner,
    MissionState,
    StoppingConfig,
    detect_outlier,
    mission_report,
    required_samples,
    should_stop,
)
from .segmentation import (
    Particle,
    ParticleSet,
    PileSegmenter,
    QualityScore,
    ScaleCalibration,
    calibrate_from_altitude,
    calibrate_scale,
    delineate,
    mask_non_rock,
    particles_to_distribution,
    quality_score,
)
from .swebrec import FitResult, SwebrecCurve, SwebrecParams
from .synthpile import (
    CameraModel,
    Disc,
    FlightPlan,
    PileLayout,
    PileSpec,
    Waypoint,
    generate_pile,
    ground_truth_distribution,
    plan_flight,
    render_frame,
)
from .validation import AnalysisError

__version__ = "0.1.0"

__all__ = [
    "AnalysisError",
    "CameraModel",
    "CharacteristicSizes",
    "Disc",
    "FitResult",
    "FlightPlan",
    "FrameResult",
    "MissionRunner",
    "MissionState",
    "Particle",
    "ParticleSet",
    "PileLayout",
    "PileSegmenter",
    "PileSpec",
    "QualityScore",
    "ScaleCalibration",
    "SieveAnalysis",
    "SieveRecord",
    "SizeDistribution",
    "StoppingConfig",
    "SwebrecCurve",
    "SwebrecParams",
    "Waypoint",
    "average_log_error",
    "calibrate_from_altitude",
    "calibrate_scale",
    "characteristic_size",
    "characteristic_sizes",
    "delineate",
    "detect_outlier",
    "generate_pile",
    "ground_truth_distribution",
    "log_size_error",
    "mask_non_rock",
    "mass_passing_curve",
    "mission_report",
    "particles_to_distribution",
    "percent_difference",
    "percent_passing_at",
    "percent_true_error",
    "plan_flight",
    "pool_distributions",
    "quality_score",
    "render_frame",
    "required_samples",
    "should_stop",
    "sieve_to_distribution",
]

"""
Synthetic star-pattern event streams with exact ground truth, and the
accuracy and feature-age evaluation of tracks against it.

"""

from .scene import (
    SyntheticScene,
    MotionSegment,
    MotionProfile,
    Scenario,
    parse_segments,
    load_scenario,
    default_scenario,
    scenario_with,
)

from .generator import (
    EventPacket,
    GroundTruth,
    generate_synthetic_events,
    scenario_seeds,
    ground_truth_records,
)

from .evaluation import (
    FeatureEvaluation,
    trajectory_error,
    feature_age_cdf,
    EvalReport,
    evaluate_tracks,
)

from .bench import (
    BenchRow,
    single_star_workload,
    time_steps,
    benchmark_solver_modes,
)

__all__ = [
    # scene.py
    "SyntheticScene",
    "MotionSegment",
    "MotionProfile",
    "Scenario",
    "parse_segments",
    "load_scenario",
    "default_scenario",
    "scenario_with",
    # generator.py
    "EventPacket",
    "GroundTruth",
    "generate_synthetic_events",
    "scenario_seeds",
    "ground_truth_records",
    # evaluation.py
    "FeatureEvaluation",
    "trajectory_error",
    "feature_age_cdf",
    "EvalReport",
    "evaluate_tracks",
    # bench.py
    "BenchRow",
    "single_star_workload",
    "time_steps",
    "benchmark_solver_modes",
]

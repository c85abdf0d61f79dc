from .solver import (
    SolverMode,
    MAX_GRADIENT_CHANGES,
    window_offsets,
    window_positions,
    round_center,
    ModelWindow,
    build_model_window,
    ModelWindowCache,
    sample_template,
    template_gradient,
    update_gradient_local,
    ChangeSet,
    sample_stacked,
    WarpedTemplate,
    build_jacobian,
    ecc_cost,
    EccCache,
    refresh_cache_full,
    StepSolution,
    closed_form_step,
    pseudo_inverse_step,
    update_cache_incremental,
    EccSolver,
)

from .tracker import (
    TrackStatus,
    StepKind,
    StepOutcome,
    apply_state_update,
    HealthMonitor,
    FeatureTracker,
    init_feature,
)

from .engine import SeedResult, track_seed, track_seeds

__all__ = [
    # solver.py
    "SolverMode",
    "MAX_GRADIENT_CHANGES",
    "window_offsets",
    "window_positions",
    "round_center",
    "ModelWindow",
    "build_model_window",
    "ModelWindowCache",
    "sample_template",
    "template_gradient",
    "update_gradient_local",
    "ChangeSet",
    "sample_stacked",
    "WarpedTemplate",
    "build_jacobian",
    "ecc_cost",
    "EccCache",
    "refresh_cache_full",
    "StepSolution",
    "closed_form_step",
    "pseudo_inverse_step",
    "update_cache_incremental",
    "EccSolver",
    # tracker.py
    "TrackStatus",
    "StepKind",
    "StepOutcome",
    "apply_state_update",
    "HealthMonitor",
    "FeatureTracker",
    "init_feature",
    # engine.py
    "SeedResult",
    "track_seed",
    "track_seeds",
]

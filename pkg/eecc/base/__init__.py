from .misc import (
    TimestampOrderWarning,
    OutOfSensorWarning,
    SeedRejectedWarning,
    TemplateClipWarning,
    filter_warnings,
    EECCError,
    ShapeError,
    DegenerateWindowError,
    SolverDegenerateError,
    InitStarvedError,
    EventOrderError,
    ContractViolationError,
    EmptyOverlapError,
    ConfigError,
    StreamParseError,
)

from .geometry import (
    Event,
    FeatureState,
    rotation_matrix,
    warp_to_template,
    warp_from_template,
    warp_jacobian,
    in_neighborhood,
)

from .density import (
    FOOTPRINT,
    bilinear_weights,
    bilinear_weights_batch,
    padded_footprints,
    sample_map,
    DensityMap,
)

from .buffer import EventBuffer

from .track import TerminationReason, TrackRecord

__all__ = [
    # misc.py
    "TimestampOrderWarning",
    "OutOfSensorWarning",
    "SeedRejectedWarning",
    "TemplateClipWarning",
    "filter_warnings",
    "EECCError",
    "ShapeError",
    "DegenerateWindowError",
    "SolverDegenerateError",
    "InitStarvedError",
    "EventOrderError",
    "ContractViolationError",
    "EmptyOverlapError",
    "ConfigError",
    "StreamParseError",
    # geometry.py
    "Event",
    "FeatureState",
    "rotation_matrix",
    "warp_to_template",
    "warp_from_template",
    "warp_jacobian",
    "in_neighborhood",
    # density.py
    "FOOTPRINT",
    "bilinear_weights",
    "bilinear_weights_batch",
    "padded_footprints",
    "sample_map",
    "DensityMap",
    # buffer.py
    "EventBuffer",
    # track.py
    "TerminationReason",
    "TrackRecord",
]

import mpi4py
import atexit

__version__ = "0.1.0"

__all__ = ["__version__"]

mpi4py.rc.initialize = False

from mpi4py import MPI  # noqa: E402

if MPI.Is_initialized() is False:
    MPI.Init_thread(required=MPI.THREAD_FUNNELED)


from .mpi import MPI_UTILS, Finalize, MPI_RAISE_EXCEPTION  # noqa: E402

# `core` before `io`: the tracker reads `io.config`, which reads the solver modes
from . import base, math, core, io, synth, utilities  # noqa: E402

from .base import (  # noqa: E402
    Event,
    FeatureState,
    DensityMap,
    EventBuffer,
    TerminationReason,
    TrackRecord,
    EECCError,
    ShapeError,
)

from .core import (  # noqa: E402
    SolverMode,
    EccSolver,
    closed_form_step,
    FeatureTracker,
    init_feature,
    track_seeds,
)

from .io import (  # noqa: E402
    Config,
    load_config,
    parse_event_stream,
    parse_seeds,
)

from .synth import (  # noqa: E402
    generate_synthetic_events,
    trajectory_error,
    feature_age_cdf,
    evaluate_tracks,
)

__all__ = __all__ + [
    # ./mpi.py
    "MPI_UTILS",
    "Finalize",
    "MPI_RAISE_EXCEPTION",
    # ./base/
    "base",
    "Event",
    "FeatureState",
    "DensityMap",
    "EventBuffer",
    "TerminationReason",
    "TrackRecord",
    "EECCError",
    "ShapeError",
    # ./math/
    "math",
    # ./core/
    "core",
    "SolverMode",
    "EccSolver",
    "closed_form_step",
    "FeatureTracker",
    "init_feature",
    "track_seeds",
    # ./io/
    "io",
    "Config",
    "load_config",
    "parse_event_stream",
    "parse_seeds",
    # ./synth/
    "synth",
    "generate_synthetic_events",
    "trajectory_error",
    "feature_age_cdf",
    "evaluate_tracks",
    # ./utilities/
    "utilities",
]

atexit.register(Finalize)

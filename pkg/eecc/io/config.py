from dataclasses import dataclass, fields, replace
from typing import Any, Dict

import numpy as np

from ..base.misc import ConfigError
from ..core.solver import SolverMode
from ..mpi import MPI_RAISE_EXCEPTION

from .text import parse_bool, read_key_values


@dataclass
class Config:
    """Tracker, evaluation and sensor parameters

    Attributes
    ----------
    patch_radius : int
        Window half width `N`; windows are $(2N+1) \\times (2N+1)$
    buffer_events : int
        Event buffer capacity $2M+1$
    clamp_px : float
        Largest translation applied per event
    clamp_deg : float
        Largest rotation applied per event, in degrees
    clamp_enabled : bool
        Whether per-event updates are clamped at all
    rho_floor : float
        Correlation below which a step counts as poorly aligned
    rho_patience : int
        Consecutive poorly aligned steps after which a track is lost
    idle_timeout_s : float
        Time without a gated event after which a track is dropped
    refresh_every : int
        Accepted events between two forced relinearisations
    relinearize_px : float
        Drift from the linearisation state (pixels) forcing a relinearisation
    relinearize_deg : float
        Drift from the linearisation state (degrees) forcing a relinearisation
    solver_mode : SolverMode
        Incremental or full-recompute solver cache
    strict_timestamps : bool
        Fail on non-monotone stream timestamps instead of skipping them
    outlier_px : float
        Position error above which a feature counts as an outlier
    width : int
        Sensor width in pixels
    height : int
        Sensor height in pixels
    """

    patch_radius: int = 15
    buffer_events: int = 193
    clamp_px: float = 1.0
    clamp_deg: float = 2.0
    clamp_enabled: bool = True
    rho_floor: float = 0.2
    rho_patience: int = 500
    idle_timeout_s: float = 1.0
    refresh_every: int = 1000
    relinearize_px: float = 0.5
    relinearize_deg: float = 1.0
    solver_mode: SolverMode = SolverMode.INCREMENTAL
    strict_timestamps: bool = False
    outlier_px: float = 5.0
    width: int = 240
    height: int = 180

    def __post_init__(self):
        self.solver_mode = _solver_mode(self.solver_mode)
        self.validate()

    @property
    def half_buffer(self) -> int:
        """`M`"""
        return self.buffer_events // 2

    @property
    def clamp_rad(self) -> float:
        return float(np.deg2rad(self.clamp_deg))

    @property
    def idle_timeout_us(self) -> int:
        return int(round(self.idle_timeout_s * 1.0e6))

    def validate(self) -> None:
        MPI_RAISE_EXCEPTION(
            condition=(self.patch_radius < 2),
            exception=ConfigError,
            message=f"patch_radius must be at least 2, got {self.patch_radius}",
        )
        MPI_RAISE_EXCEPTION(
            condition=(self.buffer_events < 9 or self.buffer_events % 2 == 0),
            exception=ConfigError,
            message="buffer_events must be an odd number not smaller than 9, "
            f"got {self.buffer_events}",
        )
        MPI_RAISE_EXCEPTION(
            condition=(self.outlier_px <= 0),
            exception=ConfigError,
            message=f"outlier_px must be positive, got {self.outlier_px}",
        )
        MPI_RAISE_EXCEPTION(
            condition=(self.clamp_px <= 0 or self.clamp_deg <= 0),
            exception=ConfigError,
            message="clamp_px and clamp_deg must be positive",
        )
        MPI_RAISE_EXCEPTION(
            condition=(not -1.0 <= self.rho_floor <= 1.0),
            exception=ConfigError,
            message=f"rho_floor must lie in [-1, 1], got {self.rho_floor}",
        )
        MPI_RAISE_EXCEPTION(
            condition=(self.rho_patience < 1 or self.refresh_every < 1),
            exception=ConfigError,
            message="rho_patience and refresh_every must be positive",
        )
        MPI_RAISE_EXCEPTION(
            condition=(self.idle_timeout_s <= 0),
            exception=ConfigError,
            message=f"idle_timeout_s must be positive, got {self.idle_timeout_s}",
        )
        MPI_RAISE_EXCEPTION(
            condition=(self.relinearize_px <= 0 or self.relinearize_deg <= 0),
            exception=ConfigError,
            message="relinearize_px and relinearize_deg must be positive",
        )
        MPI_RAISE_EXCEPTION(
            condition=(self.width <= 0 or self.height <= 0),
            exception=ConfigError,
            message=f"Invalid sensor size {self.width}x{self.height}",
        )
        MPI_RAISE_EXCEPTION(
            condition=(
                2 * self.patch_radius + 1 > min(self.width, self.height)
            ),
            exception=ConfigError,
            message=f"A {2 * self.patch_radius + 1}-pixel window does not fit a "
            f"{self.width}x{self.height} sensor",
        )

    def with_overrides(self, **overrides) -> "Config":
        return replace(self, **overrides)


def _solver_mode(value) -> SolverMode:
    if isinstance(value, SolverMode):
        return value
    if isinstance(value, str):
        try:
            return SolverMode[value.strip().upper()]
        except KeyError:
            pass
    try:
        return SolverMode(int(value))
    except (TypeError, ValueError):
        raise ConfigError(
            f"solver_mode must be `incremental` or `full`, got {value!r}"
        )


_CONVERTERS = {
    int: int,
    float: float,
    bool: parse_bool,
    SolverMode: _solver_mode,
}


def load_config(source=None) -> Config:
    """Reads a `key = value` configuration; absent keys take their default.

    `N` is accepted for `patch_radius` and `M` (half buffer) for
    `buffer_events = 2M + 1`.

    Parameters
    ----------
    source : path | text stream | None
        Configuration text; `None` gives the defaults

    Raises
    ------
    ConfigError
        On unknown keys, unparsable values or invalid parameters
    """
    if source is None:
        return Config()

    types = {f.name: f.type for f in fields(Config)}
    values: Dict[str, Any] = {}
    for key, (raw, line_number) in read_key_values(source).items():
        if key == "N":
            key = "patch_radius"
        elif key == "M":
            key = "buffer_events"
            raw = str(2 * int(raw) + 1) if raw.lstrip("-").isdigit() else raw
        if key not in types:
            raise ConfigError(f"line {line_number}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {line_number}: {key!r} given twice")
        try:
            values[key] = _CONVERTERS[types[key]](raw)
        except (ValueError, ConfigError) as err:
            raise ConfigError(f"line {line_number}: invalid value for {key!r}: {err}")

    return Config(**values)

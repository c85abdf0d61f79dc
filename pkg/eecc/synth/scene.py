"""Star-pattern scenes under piecewise in-plane motion."""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..base.misc import ConfigError
from ..io.text import read_key_values
from ..mpi import MPI_RAISE_EXCEPTION


@dataclass
class SyntheticScene:
    """A grid of star polygons whose edges fire events.

    Attributes
    ----------
    width : int
        Sensor width
    height : int
        Sensor height
    star_rows : int
        Rows of the star grid
    star_cols : int
        Columns of the star grid
    star_points : int
        Tips of each star
    star_outer_px : float
        Tip radius
    star_inner_px : float
        Notch radius
    edge_rate : float
        Events per pixel of edge per second
    noise_rate : float
        Uniform background events per second over the whole sensor
    jitter_px : float
        Standard deviation of the Gaussian event localisation noise
    """

    width: int = 240
    height: int = 180
    star_rows: int = 2
    star_cols: int = 3
    star_points: int = 5
    star_outer_px: float = 12.0
    star_inner_px: float = 5.0
    edge_rate: float = 100.0
    noise_rate: float = 0.0
    jitter_px: float = 0.3

    def __post_init__(self):
        MPI_RAISE_EXCEPTION(
            condition=(self.star_rows < 1 or self.star_cols < 1 or self.star_points < 2),
            exception=ConfigError,
            message="The star pattern is empty",
        )
        MPI_RAISE_EXCEPTION(
            condition=(not 0.0 < self.star_inner_px < self.star_outer_px),
            exception=ConfigError,
            message="Star radii must satisfy 0 < inner < outer",
        )
        MPI_RAISE_EXCEPTION(
            condition=(self.edge_rate < 0 or self.noise_rate < 0 or self.jitter_px < 0),
            exception=ConfigError,
            message="Event rates and jitter must be non-negative",
        )
        MPI_RAISE_EXCEPTION(
            condition=(self.width <= 0 or self.height <= 0),
            exception=ConfigError,
            message=f"Invalid sensor size {self.width}x{self.height}",
        )

    @property
    def center(self) -> np.ndarray:
        """Rotation and zoom centre, the middle of the sensor"""
        return np.array([(self.width - 1) / 2.0, (self.height - 1) / 2.0])

    def star_centers(self) -> np.ndarray:
        """`(rows * cols, 2)` integer star centres, row by row"""
        xs = np.round(self.width * np.arange(1, self.star_cols + 1) / (self.star_cols + 1))
        ys = np.round(self.height * np.arange(1, self.star_rows + 1) / (self.star_rows + 1))
        gy, gx = np.meshgrid(ys, xs, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel()], axis=1)

    def star_polygon(self) -> np.ndarray:
        """Vertices of a star centred at the origin, tips and notches
        alternating, the first tip pointing up"""
        nvert = 2 * self.star_points
        angles = -np.pi / 2.0 + np.pi * np.arange(nvert) / self.star_points
        radii = np.where(np.arange(nvert) % 2 == 0, self.star_outer_px, self.star_inner_px)
        return np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)

    def edges(self) -> np.ndarray:
        """`(K, 2, 2)` edge segments of every star at time zero"""
        polygon = self.star_polygon()
        single = np.stack([polygon, np.roll(polygon, -1, axis=0)], axis=1)
        return np.concatenate([single + c for c in self.star_centers()], axis=0)

    def edge_length(self) -> float:
        edges = self.edges()
        return float(np.linalg.norm(edges[:, 1] - edges[:, 0], axis=1).sum())


@dataclass
class MotionSegment:
    """Constant-rate piece of motion

    Attributes
    ----------
    vx : float
        Translation velocity along x, px/s
    vy : float
        Translation velocity along y, px/s
    omega : float
        Angular velocity, rad/s
    duration : float
        Length of the piece, s
    zoom : float
        Logarithmic scale rate, 1/s
    """

    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0
    duration: float = 1.0
    zoom: float = 0.0


@dataclass
class MotionProfile:
    """Piecewise motion of the whole scene about `center`.

    A pattern point `p` is imaged at
    $X(t) = c + S(t) R(\\phi(t)) (p - c) + d(t)$, where translation `d`,
    angle $\\phi$ and log-scale grow at the constant rates of the current
    segment. Past the last segment its rates continue.
    """

    segments: List[MotionSegment]
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        MPI_RAISE_EXCEPTION(
            condition=(len(self.segments) == 0),
            exception=ConfigError,
            message="A motion profile needs at least one segment",
        )
        MPI_RAISE_EXCEPTION(
            condition=any(
                not s.duration > 0
                or not np.all(np.isfinite([s.vx, s.vy, s.omega, s.zoom]))
                for s in self.segments
            ),
            exception=ConfigError,
            message="Motion segments need a positive duration and finite rates",
        )
        self.center = np.asarray(self.center, dtype=np.float64)
        durations = np.array([s.duration for s in self.segments])
        rates = np.array([[s.vx, s.vy, s.omega, s.zoom] for s in self.segments])
        self._starts = np.concatenate([[0.0], np.cumsum(durations)[:-1]])
        # translation, angle and log-scale at the start of each segment
        self._origins = np.concatenate(
            [np.zeros((1, 4)), np.cumsum(rates * durations[:, None], axis=0)[:-1]]
        )
        self._rates = rates

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def parameters(self, t) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Translation `(n, 2)`, angle `(n,)` and scale `(n,)` at times `t`"""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        idx = np.clip(np.searchsorted(self._starts, t, side="right") - 1, 0, None)
        tau = (t - self._starts[idx])[:, None]
        values = self._origins[idx] + self._rates[idx] * tau
        return values[:, 0:2], values[:, 2], np.exp(values[:, 3])

    def apply(self, points, t) -> np.ndarray:
        """Images of pattern points, `points[i]` at time `t[i]`"""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        d, phi, scale = self.parameters(t)
        c = np.cos(phi)
        s = np.sin(phi)
        rel = points - self.center
        rotated = np.stack([c * rel[:, 0] - s * rel[:, 1], s * rel[:, 0] + c * rel[:, 1]], axis=1)
        return self.center + scale[:, None] * rotated + d

    def invert(self, x, t) -> np.ndarray:
        """Pattern points imaged at `x[i]` at time `t[i]`"""
        x = np.asarray(x, dtype=np.float64).reshape(-1, 2)
        d, phi, scale = self.parameters(t)
        c = np.cos(phi)
        s = np.sin(phi)
        rel = (x - self.center - d) / scale[:, None]
        return self.center + np.stack(
            [c * rel[:, 0] + s * rel[:, 1], -s * rel[:, 0] + c * rel[:, 1]], axis=1
        )


@dataclass
class Scenario:
    """Scene, motion and sampling settings of a synthetic run"""

    scene: SyntheticScene
    motion: MotionProfile
    rng_seed: int = 0
    seed_time_s: float = 0.0
    gt_step_s: float = 0.001

    @property
    def duration(self) -> float:
        return self.motion.duration


_SCENE_KEYS = {
    "width": int,
    "height": int,
    "star_rows": int,
    "star_cols": int,
    "star_points": int,
    "star_outer_px": float,
    "star_inner_px": float,
    "edge_rate": float,
    "noise_rate": float,
    "jitter_px": float,
}
_MOTION_KEYS = {
    "vx": float,
    "vy": float,
    "omega_deg": float,
    "zoom_rate": float,
    "duration_s": float,
}
_RUN_KEYS = {
    "segments": str,
    "rng_seed": int,
    "seed_time_s": float,
    "gt_step_s": float,
}


def parse_segments(text: str) -> List[MotionSegment]:
    """`vx vy omega_deg duration_s [zoom_rate]` tuples separated by `;`"""
    segments = []
    for chunk in text.split(";"):
        fields = chunk.split()
        if not fields:
            continue
        if len(fields) not in (4, 5):
            raise ConfigError(
                f"segment {chunk.strip()!r} needs `vx vy omega_deg duration_s [zoom_rate]`"
            )
        vx, vy, omega_deg, duration = (float(v) for v in fields[:4])
        zoom = float(fields[4]) if len(fields) == 5 else 0.0
        segments.append(
            MotionSegment(
                vx=vx, vy=vy, omega=np.deg2rad(omega_deg), duration=duration, zoom=zoom
            )
        )
    return segments


def default_scenario() -> Scenario:
    return load_scenario(None)


def load_scenario(source=None) -> Scenario:
    """Reads a scenario in the `key = value` format of configuration files.

    Without `segments`, a single segment is built from `vx`, `vy`,
    `omega_deg`, `zoom_rate` and `duration_s`.

    Raises
    ------
    ConfigError
        On unknown keys, invalid values or a non-positive duration
    """
    entries = {} if source is None else read_key_values(source)
    values = {}
    for key, (raw, line_number) in entries.items():
        kind = _SCENE_KEYS.get(key) or _MOTION_KEYS.get(key) or _RUN_KEYS.get(key)
        if kind is None:
            raise ConfigError(f"line {line_number}: unknown scenario key {key!r}")
        try:
            values[key] = kind(raw)
        except ValueError as err:
            raise ConfigError(f"line {line_number}: invalid value for {key!r}: {err}")

    scene = SyntheticScene(**{k: values[k] for k in _SCENE_KEYS if k in values})

    if "segments" in values:
        MPI_RAISE_EXCEPTION(
            condition=any(k in values for k in _MOTION_KEYS),
            exception=ConfigError,
            message="`segments` excludes vx, vy, omega_deg, zoom_rate and duration_s",
        )
        segments = parse_segments(values["segments"])
    else:
        duration = values.get("duration_s", 1.0)
        MPI_RAISE_EXCEPTION(
            condition=(not duration > 0),
            exception=ConfigError,
            message=f"duration_s must be positive, got {duration}",
        )
        segments = [
            MotionSegment(
                vx=values.get("vx", 20.0),
                vy=values.get("vy", 10.0),
                omega=np.deg2rad(values.get("omega_deg", 10.0)),
                duration=duration,
                zoom=values.get("zoom_rate", 0.0),
            )
        ]

    motion = MotionProfile(segments=segments, center=scene.center)
    scenario = Scenario(
        scene=scene,
        motion=motion,
        rng_seed=values.get("rng_seed", 0),
        seed_time_s=values.get("seed_time_s", 0.0),
        gt_step_s=values.get("gt_step_s", 0.001),
    )
    MPI_RAISE_EXCEPTION(
        condition=(scenario.gt_step_s <= 0 or scenario.seed_time_s < 0),
        exception=ConfigError,
        message="gt_step_s must be positive and seed_time_s non-negative",
    )
    return scenario


def scenario_with(
    vx: float = 0.0,
    vy: float = 0.0,
    omega_deg: float = 0.0,
    duration_s: float = 1.0,
    zoom_rate: float = 0.0,
    scene: Optional[SyntheticScene] = None,
    rng_seed: int = 0,
    seed_time_s: float = 0.0,
) -> Scenario:
    """Single-segment scenario built in code"""
    scene = SyntheticScene() if scene is None else scene
    motion = MotionProfile(
        segments=[
            MotionSegment(
                vx=vx,
                vy=vy,
                omega=np.deg2rad(omega_deg),
                duration=duration_s,
                zoom=zoom_rate,
            )
        ],
        center=scene.center,
    )
    return Scenario(
        scene=scene, motion=motion, rng_seed=rng_seed, seed_time_s=seed_time_s
    )

from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..base.geometry import Event, FeatureState
from ..base.track import TerminationReason, TrackRecord
from ..io.streams import SeedSpec

from .scene import MotionProfile, Scenario, SyntheticScene


@dataclass
class EventPacket:
    """Column storage of a time-sorted event stream

    Attributes
    ----------
    t_us : np.ndarray
        Integer microsecond timestamps, non-decreasing
    x : np.ndarray
        Columns
    y : np.ndarray
        Rows
    polarity : np.ndarray
        +1 / -1
    """

    t_us: np.ndarray
    x: np.ndarray
    y: np.ndarray
    polarity: np.ndarray

    def __len__(self) -> int:
        return int(self.t_us.shape[0])

    def __iter__(self) -> Iterator[Event]:
        for t_us, x, y, p in zip(
            self.t_us.tolist(), self.x.tolist(), self.y.tolist(), self.polarity.tolist()
        ):
            yield Event(t_us=t_us, x=x, y=y, polarity=p)

    def positions(self) -> np.ndarray:
        return np.stack([self.x, self.y], axis=1)


class GroundTruth(object):
    """Exact feature trajectories of a scenario.

    A seed at `x0` and time `t0` is the image of the pattern point
    $p = T_{t_0}^{-1}(x_0)$; later it sits at $T_t(p)$ with orientation
    $\\phi(t) - \\phi(t_0)$.
    """

    def __init__(self, motion: MotionProfile):
        self.motion = motion

    def trajectory(self, x0, t0: float, times) -> Tuple[np.ndarray, np.ndarray]:
        """Positions `(n, 2)` and orientations `(n,)` at `times` (seconds)"""
        times = np.atleast_1d(np.asarray(times, dtype=np.float64))
        pattern = self.motion.invert(np.asarray(x0, dtype=np.float64), t0)
        positions = self.motion.apply(pattern, times)
        _, phi0, _ = self.motion.parameters(t0)
        _, phi, _ = self.motion.parameters(times)
        return positions, phi - phi0[0]

    def record(
        self, feature_id: int, seed: SeedSpec, end_s: float, step_s: float = 0.001
    ) -> TrackRecord:
        """Ground-truth track sampled every `step_s` from the seed time to
        `end_s`, both included"""
        start_us = seed.t_us
        end_us = int(round(end_s * 1.0e6))
        step_us = max(1, int(round(step_s * 1.0e6)))
        times_us = np.arange(start_us, end_us + 1, step_us, dtype=np.int64)
        if times_us[-1] != end_us and end_us > start_us:
            times_us = np.append(times_us, end_us)
        positions, theta = self.trajectory((seed.x, seed.y), seed.t, times_us * 1.0e-6)

        record = TrackRecord(feature_id=feature_id, reason=TerminationReason.END_OF_STREAM)
        for t_us, (x, y), th in zip(times_us.tolist(), positions, theta):
            record.append(t_us, FeatureState(x=x, y=y, theta=th))
        return record


def generate_synthetic_events(
    scene: SyntheticScene,
    motion: MotionProfile,
    seed: int = 0,
    duration: Optional[float] = None,
) -> Tuple[EventPacket, GroundTruth]:
    """Samples events along the moving star edges plus uniform background
    noise.

    Edge events form a Poisson process of rate `edge_rate` per pixel of
    edge: times are uniform over the run, the edge is drawn in proportion to
    its length and the point uniformly along it, before Gaussian jitter.
    Events falling outside the sensor are dropped. The output is sorted by
    timestamp, stably, and is a deterministic function of `seed`.

    Returns
    -------
    Tuple[EventPacket, GroundTruth]
        The stream and the exact trajectories of the scene
    """
    rng = np.random.default_rng(seed)
    duration = motion.duration if duration is None else duration

    edges = scene.edges()
    vectors = edges[:, 1] - edges[:, 0]
    lengths = np.linalg.norm(vectors, axis=1)
    total = lengths.sum()

    n_edge = rng.poisson(scene.edge_rate * total * duration)
    t_edge = rng.uniform(0.0, duration, size=n_edge)
    which = rng.choice(len(lengths), size=n_edge, p=lengths / total)
    along = rng.uniform(0.0, 1.0, size=n_edge)
    pattern = edges[which, 0] + along[:, None] * vectors[which]
    xy_edge = motion.apply(pattern, t_edge) + rng.normal(
        0.0, scene.jitter_px, size=(n_edge, 2)
    )

    n_noise = rng.poisson(scene.noise_rate * duration)
    t_noise = rng.uniform(0.0, duration, size=n_noise)
    xy_noise = rng.uniform(0.0, 1.0, size=(n_noise, 2)) * np.array(
        [scene.width, scene.height]
    )

    t_us = np.round(np.concatenate([t_edge, t_noise]) * 1.0e6).astype(np.int64)
    xy = np.concatenate([xy_edge, xy_noise], axis=0)
    polarity = rng.choice(np.array([-1, 1], dtype=np.int64), size=t_us.shape[0])

    order = np.argsort(t_us, kind="stable")
    t_us = t_us[order]
    xy = xy[order]
    polarity = polarity[order]

    inside = (
        (xy[:, 0] >= 0.0)
        & (xy[:, 0] < scene.width)
        & (xy[:, 1] >= 0.0)
        & (xy[:, 1] < scene.height)
    )
    packet = EventPacket(
        t_us=t_us[inside],
        x=xy[inside, 0],
        y=xy[inside, 1],
        polarity=polarity[inside],
    )
    return packet, GroundTruth(motion)


def scenario_seeds(scenario: Scenario) -> List[SeedSpec]:
    """One seed per star centre, at the scenario seed time"""
    t_us = int(round(scenario.seed_time_s * 1.0e6))
    centers = scenario.motion.apply(scenario.scene.star_centers(), scenario.seed_time_s)
    centers = np.floor(centers + 0.5)
    return [
        SeedSpec(t_us=t_us, x=float(x), y=float(y), label=f"star{idx}")
        for idx, (x, y) in enumerate(centers)
    ]


def ground_truth_records(
    ground_truth: GroundTruth,
    seeds: Sequence[SeedSpec],
    end_s: float,
    step_s: float = 0.001,
) -> List[TrackRecord]:
    return [
        ground_truth.record(idx, seed, end_s=end_s, step_s=step_s)
        for idx, seed in enumerate(seeds)
    ]

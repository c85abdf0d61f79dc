"""Per-event step timing of the two solver cache modes."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..base.geometry import FeatureState
from ..core.solver import SolverMode
from ..core.tracker import FeatureTracker, StepKind
from ..io.config import Config
from ..utilities import step_time_summary

from .generator import EventPacket, generate_synthetic_events
from .scene import SyntheticScene, scenario_with

logger = logging.getLogger(__name__)


@dataclass
class BenchRow:
    """Timing of one solver mode

    Attributes
    ----------
    mode : str
        `incremental` or `full`
    events : int
        Timed steps
    mean_us : float
        Mean wall time of a step, template update and cache update
    median_us : float
        Median of the same times
    """

    mode: str
    events: int
    mean_us: float
    median_us: float


def single_star_workload(
    events: int,
    vx: float = 50.0,
    vy: float = 0.0,
    omega_deg: float = 0.0,
    buffer_events: int = 193,
    rng_seed: int = 0,
) -> Tuple[EventPacket, FeatureState]:
    """Events of one star at the sensor centre, enough for `events` steps
    after initialisation, and the seed placed on the star"""
    scene = SyntheticScene(star_rows=1, star_cols=1)
    rate = scene.edge_rate * scene.edge_length()
    duration = 1.05 * (events + buffer_events) / rate + 0.01
    scenario = scenario_with(
        vx=vx, vy=vy, omega_deg=omega_deg, duration_s=duration, scene=scene
    )
    packet, _ = generate_synthetic_events(scenario.scene, scenario.motion, seed=rng_seed)
    center = scene.star_centers()[0]
    return packet, FeatureState(x=center[0], y=center[1])


def time_steps(
    packet: EventPacket, seed: FeatureState, config: Config, limit: Optional[int] = None
) -> List[int]:
    """Wall times, in nanoseconds, of the accepted steps of one tracker"""
    tracker = FeatureTracker(seed, config=config)
    events = iter(packet)
    for event in events:
        if tracker.feed_initial(event):
            break
    elapsed = []
    for event in events:
        outcome = tracker.process_event(event)
        if outcome.kind == StepKind.STATE_UPDATED:
            elapsed.append(outcome.elapsed_ns)
        if outcome.kind == StepKind.TERMINATED:
            break
        if limit is not None and len(elapsed) >= limit:
            break
    return elapsed


def benchmark_solver_modes(
    config: Optional[Config] = None,
    modes: Sequence[SolverMode] = (SolverMode.INCREMENTAL, SolverMode.FULL),
    events: int = 5000,
    rng_seed: int = 0,
) -> List[BenchRow]:
    """Times every mode on the same single-star stream translating at
    50 px/s"""
    config = Config() if config is None else config
    packet, seed = single_star_workload(
        events, buffer_events=config.buffer_events, rng_seed=rng_seed
    )
    rows = []
    for mode in modes:
        mode = SolverMode(mode)
        elapsed = time_steps(
            packet, seed, config.with_overrides(solver_mode=mode), limit=events
        )
        summary = step_time_summary(elapsed)
        mean_us, median_us = (np.nan, np.nan) if summary is None else summary
        rows.append(
            BenchRow(
                mode=mode.name.lower(),
                events=len(elapsed),
                mean_us=mean_us,
                median_us=median_us,
            )
        )
        logger.info("%s: %d steps, mean %.1f us", mode.name.lower(), len(elapsed), mean_us)
    return rows

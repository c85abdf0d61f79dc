import logging
import math
import time
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Tuple

import numpy as np

from ..base.buffer import EventBuffer
from ..base.geometry import Event, FeatureState, in_neighborhood, warp_to_template
from ..base.track import TerminationReason, TrackRecord
from ..base.misc import (
    DegenerateWindowError,
    InitStarvedError,
    SolverDegenerateError,
    TemplateClipWarning,
)
from ..io.config import Config
from ..mpi import MPI_RAISE_EXCEPTION

from .solver import ChangeSet, EccSolver, ModelWindowCache, SolverMode

logger = logging.getLogger(__name__)


class TrackStatus(Enum):
    INITIALIZING = "initializing"
    TRACKING = "tracking"
    TERMINATED = "terminated"


class StepKind(Enum):
    REJECTED_GATE = "rejected_gate"
    REJECTED_ORDER = "rejected_order"
    STATE_UPDATED = "state_updated"
    TERMINATED = "terminated"


@dataclass
class StepOutcome:
    """Result of offering one event to a tracker.

    Attributes
    ----------
    kind : StepKind
        What happened to the event
    state : FeatureState
        Feature state after the event
    delta : np.ndarray | None
        Closed-form update about the pre-event state, before clamping
    rho : float
        Correlation coefficient of the step
    lam : float
        Scale of the normalised model in the closed-form step
    changed_gradient_pixels : int
        Size of the gradient change set of the template splat
    clamped : bool
        Whether the update was clamped
    elapsed_ns : int
        Wall time of the step, template update and cache update
    reason : TerminationReason | None
        Set when `kind` is `TERMINATED`
    """

    kind: StepKind
    state: FeatureState
    delta: Optional[np.ndarray] = None
    rho: float = np.nan
    lam: float = np.nan
    changed_gradient_pixels: int = 0
    clamped: bool = False
    elapsed_ns: int = 0
    reason: Optional[TerminationReason] = None


def apply_state_update(
    state: FeatureState,
    delta,
    clamp_px: float = 1.0,
    clamp_rad: float = np.deg2rad(2.0),
    enabled: bool = True,
) -> Tuple[FeatureState, bool]:
    """Additive state update with the translation norm and the rotation
    bounded per event.

    Returns
    -------
    Tuple[FeatureState, bool]
        The new state, with wrapped angle, and whether clamping occurred
    """
    dx, dy, dtheta = np.asarray(delta, dtype=np.float64).tolist()
    if not (math.isfinite(dx) and math.isfinite(dy) and math.isfinite(dtheta)):
        MPI_RAISE_EXCEPTION(
            condition=True,
            exception=ValueError,
            message=f"Non-finite state update {(dx, dy, dtheta)}",
        )
    clamped = False
    if enabled:
        shift = math.hypot(dx, dy)
        if shift > clamp_px:
            dx *= clamp_px / shift
            dy *= clamp_px / shift
            clamped = True
        if abs(dtheta) > clamp_rad:
            dtheta = math.copysign(clamp_rad, dtheta)
            clamped = True
    new_state = FeatureState(x=state.x + dx, y=state.y + dy, theta=state.theta + dtheta)
    return new_state, clamped


class HealthMonitor(object):
    """Termination rules of a track.

    Parameters
    ----------
    width : int
        Sensor width
    height : int
        Sensor height
    radius : int
        Window half width `N`; the centre must stay `N` pixels inside
    rho_floor : float
        Correlation below which a step counts as poorly aligned
    rho_patience : int
        Consecutive poorly aligned steps that make a track lost
    idle_timeout_us : int
        Longest gap between two gated events
    """

    def __init__(
        self,
        width: int,
        height: int,
        radius: int,
        rho_floor: float = 0.2,
        rho_patience: int = 500,
        idle_timeout_us: int = 1_000_000,
    ):
        self.width = width
        self.height = height
        self.radius = radius
        self.rho_floor = rho_floor
        self.rho_patience = rho_patience
        self.idle_timeout_us = idle_timeout_us
        self.low_rho_run = 0

    def in_bounds(self, state: FeatureState) -> bool:
        return bool(
            self.radius <= state.x <= self.width - 1 - self.radius
            and self.radius <= state.y <= self.height - 1 - self.radius
        )

    def observe(self, rho: float) -> None:
        if rho < self.rho_floor:
            self.low_rho_run += 1
        else:
            self.low_rho_run = 0

    @property
    def is_lost(self) -> bool:
        return self.low_rho_run >= self.rho_patience

    def is_idle(self, now_us: int, last_accepted_us: int) -> bool:
        return now_us - last_accepted_us > self.idle_timeout_us


class FeatureTracker(object):
    """One feature followed event by event.

    Parameters
    ----------
    seed : FeatureState
        Initial state, recorded as given
    config : Config | None
        Tracker parameters, defaults when `None`
    feature_id : int
        Identifier written to track files
    start_us : int
        Seed time. Gated events before it only pre-fill the buffer, so that
        the initial buffer is centred on the seed time when the stream
        allows it

    Attributes
    ----------
    state : FeatureState
        Current state
    status : TrackStatus
        Life-cycle stage
    reason : TerminationReason | None
        Set once terminated
    accepted : int
        Gated events that produced a state
    rejected : int
        Events outside the gate while tracking
    processed : int
        Events offered to the tracker
    iterations : int
        Solver steps taken
    """

    def __init__(
        self,
        seed: FeatureState,
        config: Optional[Config] = None,
        feature_id: int = 0,
        start_us: int = 0,
    ):
        self.config = Config() if config is None else config
        self.feature_id = feature_id
        self.start_us = int(start_us)

        radius = self.config.patch_radius
        self.monitor = HealthMonitor(
            width=self.config.width,
            height=self.config.height,
            radius=radius,
            rho_floor=self.config.rho_floor,
            rho_patience=self.config.rho_patience,
            idle_timeout_us=self.config.idle_timeout_us,
        )
        self.state = FeatureState(x=seed.x, y=seed.y, theta=seed.theta)
        MPI_RAISE_EXCEPTION(
            condition=(not self.monitor.in_bounds(self.state)),
            exception=ValueError,
            message=f"Seed ({seed.x}, {seed.y}) is closer than {radius} pixels "
            f"to the border of the {self.config.width}x{self.config.height} sensor",
        )

        self.buffer = EventBuffer(self.config.buffer_events)
        self.solver = EccSolver(
            radius=radius,
            mode=self.config.solver_mode,
            relinearize_px=self.config.relinearize_px,
            relinearize_deg=self.config.relinearize_deg,
            refresh_every=self.config.refresh_every,
        )
        self.models = ModelWindowCache(
            self.buffer,
            radius,
            reuse_footprints=(self.solver.mode == SolverMode.INCREMENTAL),
        )
        self.record = TrackRecord(feature_id=feature_id)
        self.status = TrackStatus.INITIALIZING
        self.reason: Optional[TerminationReason] = None

        self.accepted = 0
        self.rejected = 0
        self.rejected_order = 0
        self.processed = 0
        self.iterations = 0
        self.clamped_steps = 0
        self.clipped_splats = 0
        self.last_accepted_us = self.start_us
        self.last_rho = np.nan
        self._degenerate = False

    @property
    def radius(self) -> int:
        return self.config.patch_radius

    @property
    def template(self):
        return self.solver.template

    def feed_initial(self, event: Event) -> bool:
        """Buffers a gated event during initialisation. Returns `True` once
        the buffer is full with its central event at or after the seed time,
        and the windows are built."""
        MPI_RAISE_EXCEPTION(
            condition=(self.status != TrackStatus.INITIALIZING),
            exception=RuntimeError,
            message=f"Feature {self.feature_id} is already initialised",
        )
        self.processed += 1
        newest = self.buffer.newest_t_us
        if newest is not None and event.t_us < newest:
            return False
        if not in_neighborhood((event.x, event.y), self.state, self.radius):
            return False

        self.buffer.push(event)
        self.last_accepted_us = max(event.t_us, self.start_us)
        if not self.buffer.is_full or self.buffer.central().t_us < self.start_us:
            return False

        model = self.models.window(self.state)
        self.solver.template.splat_many(
            warp_to_template(self.buffer.positions(), self.state)
        )
        self.solver.relinearize(self.state, model)
        self.record.append(self.start_us, self.state)
        self.status = TrackStatus.TRACKING
        logger.info(
            "feature %d initialised at (%.1f, %.1f) with %d events",
            self.feature_id,
            self.state.x,
            self.state.y,
            len(self.buffer),
        )
        return True

    def process_event(self, event: Event) -> StepOutcome:
        """Gate, buffer, one closed-form step, template splat of the central
        event and cache update"""
        if self.status != TrackStatus.TRACKING:
            return StepOutcome(
                kind=StepKind.TERMINATED, state=self.state, reason=self.reason
            )

        self.processed += 1
        if event.t_us < self.buffer.newest_t_us:
            self.rejected_order += 1
            return StepOutcome(kind=StepKind.REJECTED_ORDER, state=self.state)
        if self.monitor.is_idle(event.t_us, self.last_accepted_us):
            return self._terminate(TerminationReason.IDLE)
        if not in_neighborhood((event.x, event.y), self.state, self.radius):
            self.rejected += 1
            return StepOutcome(kind=StepKind.REJECTED_GATE, state=self.state)

        start = time.perf_counter_ns()
        self.buffer.push(event)
        self.last_accepted_us = event.t_us
        try:
            model = self.models.window(self.state)
            self.solver.attach_model(self.state, model)
            solution = self.solver.step(model, self.state)
        except (DegenerateWindowError, SolverDegenerateError) as err:
            logger.debug("feature %d: %s", self.feature_id, err)
            self._degenerate = True
            return self._terminate(TerminationReason.DEGENERATE)
        self.iterations += 1

        delta = solution.delta
        self.state, clamped = apply_state_update(
            self.state,
            delta,
            clamp_px=self.config.clamp_px,
            clamp_rad=self.config.clamp_rad,
            enabled=self.config.clamp_enabled,
        )
        self.clamped_steps += int(clamped)

        central = self.buffer.central()
        changes = self.update_template_with_central_event(central)
        self.solver.update_cache(changes, self.state)
        elapsed = time.perf_counter_ns() - start

        self.accepted += 1
        # central events may share a timestamp; the track stays strictly increasing
        self.record.append(max(central.t_us, self.record.times_us[-1] + 1), self.state)
        self.last_rho = solution.rho
        self.monitor.observe(solution.rho)

        reason = self.check_health()
        return StepOutcome(
            kind=StepKind.STATE_UPDATED if reason is None else StepKind.TERMINATED,
            state=self.state,
            delta=delta,
            rho=solution.rho,
            lam=solution.lam,
            changed_gradient_pixels=len(changes.gradient_pixels),
            clamped=clamped,
            elapsed_ns=elapsed,
            reason=reason,
        )

    def update_template_with_central_event(self, central: Event) -> ChangeSet:
        """Splats the central buffer event, motion-compensated with the
        current state, into the template"""
        state = self.state
        c = math.cos(state.theta)
        s = math.sin(state.theta)
        dx = central.x - state.x
        dy = central.y - state.y
        changes = self.solver.splat_template((c * dx + s * dy, c * dy - s * dx))
        if changes.is_empty:
            self.clipped_splats += 1
        return changes

    def check_health(self, now_us: Optional[int] = None) -> Optional[TerminationReason]:
        """Terminates the track if a termination rule fires.

        Returns
        -------
        TerminationReason | None
            `None` while the track is alive
        """
        if self.status == TrackStatus.TERMINATED:
            return self.reason
        if self._degenerate:
            reason = TerminationReason.DEGENERATE
        elif not self.monitor.in_bounds(self.state):
            reason = TerminationReason.OUT_OF_BOUNDS
        elif self.monitor.is_lost:
            reason = TerminationReason.LOST
        elif now_us is not None and self.monitor.is_idle(now_us, self.last_accepted_us):
            reason = TerminationReason.IDLE
        else:
            return None
        self._terminate(reason)
        return reason

    def finish(self, reason: TerminationReason = TerminationReason.END_OF_STREAM) -> TrackRecord:
        """Closes a live track; a terminated one keeps its reason"""
        if self.status != TrackStatus.TERMINATED:
            self._terminate(reason)
        if self.clipped_splats > 0:
            warnings.warn(
                f"Feature {self.feature_id}: {self.clipped_splats} central events "
                "fell outside the template support",
                TemplateClipWarning,
            )
        return self.record

    def run(self, events: Iterable[Event]) -> TrackRecord:
        """Processes `events` until the stream ends or the track dies"""
        for event in events:
            outcome = self.process_event(event)
            if outcome.kind == StepKind.TERMINATED:
                break
        return self.finish()

    def _terminate(self, reason: TerminationReason) -> StepOutcome:
        self.status = TrackStatus.TERMINATED
        self.reason = reason
        self.record.reason = reason
        logger.info(
            "feature %d terminated (%s) after %d accepted events",
            self.feature_id,
            reason.value,
            self.accepted,
        )
        return StepOutcome(kind=StepKind.TERMINATED, state=self.state, reason=reason)


def init_feature(
    seed: FeatureState,
    events: Iterable[Event],
    config: Optional[Config] = None,
    feature_id: int = 0,
    start_us: int = 0,
) -> FeatureTracker:
    """Builds template and model windows from the first $2M+1$ gated events.

    `events` is consumed only up to the event that fills the buffer, so the
    same iterator can be handed to `FeatureTracker.process_event` afterwards.

    Raises
    ------
    InitStarvedError
        If the stream ends before the buffer is full
    """
    tracker = FeatureTracker(seed, config=config, feature_id=feature_id, start_us=start_us)
    for event in events:
        if tracker.feed_initial(event):
            return tracker

    tracker.status = TrackStatus.TERMINATED
    tracker.reason = TerminationReason.INIT_STARVED
    raise InitStarvedError(
        f"Feature {feature_id}: stream ended after {len(tracker.buffer)} of "
        f"{tracker.buffer.capacity} initial events"
    )

"""Numerical self checks of the tracker building blocks.

Each check draws its own random instances from a seeded generator and
returns a `CheckResult`; `run_selftest` runs them all and prints one
`PASS`/`FAIL` line per check.
"""

import logging
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, TextIO

import numpy as np

from .base.density import DensityMap, bilinear_weights_batch
from .base.geometry import FeatureState, warp_to_template
from .base.misc import ContractViolationError, SolverDegenerateError
from .core.solver import (
    ModelWindow,
    SolverMode,
    build_jacobian,
    closed_form_step,
    refresh_cache_full,
    round_center,
    sample_template,
    template_gradient,
)
from .core.tracker import FeatureTracker, StepKind
from .io.config import Config
from .math import wrap_angle
from .mpi import MPI_UTILS
from .synth.bench import single_star_workload
from .synth.generator import EventPacket
from .utilities import bash_colors

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    """Outcome of one self check

    Attributes
    ----------
    name : str
        Check name
    passed : bool
        Whether the check met its tolerance
    value : float
        Worst measured deviation
    tolerance : float
        Largest accepted deviation
    elapsed_s : float
        Wall time of the check
    detail : str
        Short human-readable summary
    """

    name: str
    passed: bool
    value: float
    tolerance: float
    elapsed_s: float = 0.0
    detail: str = ""


def check_bilinear_conservation(
    samples: int = 100_000, radius: int = 15, rng_seed: int = 0
) -> CheckResult:
    """Every interior splat distributes a unit mass with non-negative
    weights"""
    rng = np.random.default_rng(rng_seed)
    points = rng.uniform(-radius, radius - 1, size=(samples, 2))
    _, weights = bilinear_weights_batch(points)
    worst = float(np.abs(weights.sum(axis=1) - 1.0).max())
    negative = bool(np.any(weights < 0.0))

    density = DensityMap(radius)
    retained = density.splat_many(points)
    mass_error = abs(retained - samples) / samples
    worst = max(worst, mass_error)
    tolerance = 1.0e-12
    return CheckResult(
        name="bilinear conservation",
        passed=(worst <= tolerance and not negative),
        value=worst,
        tolerance=tolerance,
        detail=f"{samples} splats, negative weights: {negative}",
    )


def _affine_template(rng: np.random.Generator, radius: int) -> DensityMap:
    # bilinear samples and central differences of an affine map are exact
    template = DensityMap(radius)
    r = np.arange(-radius, radius + 1, dtype=np.float64)
    gy, gx = np.meshgrid(r, r, indexing="ij")
    a, b, c = rng.uniform(-1.0, 1.0, size=3)
    template.values[:] = 5.0 * radius + a * radius + b * gx + c * gy
    return template


def check_jacobian(
    instances: int = 1000,
    radius: int = 7,
    step: float = 1.0e-6,
    rng_seed: int = 0,
) -> CheckResult:
    """Analytic Jacobian of the warped template against central finite
    differences, on rows sampling at least two pixels inside the border"""
    rng = np.random.default_rng(rng_seed)
    worst = 0.0
    for _ in range(instances):
        template = _affine_template(rng, radius)
        grad_x, grad_y = template_gradient(template)
        state = FeatureState(
            x=rng.uniform(40.0, 80.0),
            y=rng.uniform(40.0, 80.0),
            theta=rng.uniform(-np.pi, np.pi),
        )
        density = DensityMap(radius)
        density.values[:] = 1.0
        model = ModelWindow(center=round_center(state.position), density=density)
        jacobian = build_jacobian(grad_x, grad_y, state, model)

        s = state.as_array()
        numeric = np.empty_like(jacobian)
        for k in range(3):
            shift = np.zeros(3)
            shift[k] = step
            plus = warp_to_template(model.positions, FeatureState.from_array(s + shift))
            minus = warp_to_template(model.positions, FeatureState.from_array(s - shift))
            numeric[:, k] = (
                sample_template(template, plus) - sample_template(template, minus)
            ) / (2.0 * step)

        points = warp_to_template(model.positions, state)
        interior = np.all(np.abs(points) <= radius - 2, axis=1)
        diff = np.abs(jacobian[interior] - numeric[interior]).max()
        scale = max(np.abs(numeric[interior]).max(), 1.0e-12)
        worst = max(worst, float(diff / scale))

    tolerance = 1.0e-4
    return CheckResult(
        name="jacobian finite differences",
        passed=worst < tolerance,
        value=worst,
        tolerance=tolerance,
        detail=f"{instances} random templates and states",
    )


def _linearized_cost(t: np.ndarray, J: np.ndarray, m_hat: np.ndarray, deltas: np.ndarray):
    warped = t[None, :] + deltas @ J.T
    warped /= np.linalg.norm(warped, axis=1, keepdims=True)
    diff = warped - m_hat[None, :]
    return np.einsum("ij,ij->i", diff, diff)


def check_closed_form_optimality(
    instances: int = 50,
    radius: int = 7,
    grid_points: int = 21,
    grid_step: float = 1.0e-2,
    rng_seed: int = 0,
) -> CheckResult:
    """The closed-form step is no worse than any point of a local grid
    around it, and vanishes at perfect alignment"""
    rng = np.random.default_rng(rng_seed)
    npix = (2 * radius + 1) ** 2
    half = grid_points // 2
    axis = grid_step * np.arange(-half, half + 1)
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)

    worst = -np.inf
    solved = 0
    while solved < instances:
        t = rng.uniform(0.0, 1.0, size=npix)
        J = rng.normal(0.0, 0.1, size=(npix, 3))
        m = t + J @ rng.normal(0.0, 0.5, size=3) + rng.normal(0.0, 0.05, size=npix)
        m_hat = m / np.linalg.norm(m)
        cache = refresh_cache_full(J, t)
        try:
            solution = closed_form_step(cache, m_hat)
        except SolverDegenerateError:
            continue
        solved += 1
        at_step = _linearized_cost(t, J, m_hat, solution.delta[None, :])[0]
        around = _linearized_cost(t, J, m_hat, solution.delta[None, :] + grid).min()
        worst = max(worst, float(at_step - around))

    t = rng.uniform(0.0, 1.0, size=npix)
    J = rng.normal(0.0, 0.1, size=(npix, 3))
    aligned = closed_form_step(refresh_cache_full(J, t), t / np.linalg.norm(t))
    aligned_norm = float(np.linalg.norm(aligned.delta))

    tolerance = 1.0e-8
    return CheckResult(
        name="closed-form step optimality",
        passed=(worst <= tolerance and aligned_norm < 1.0e-10),
        value=worst,
        tolerance=tolerance,
        detail=f"{instances} instances on a {grid_points}^3 grid, "
        f"|step| at alignment {aligned_norm:.1e}",
    )


def _relative(value, reference) -> float:
    """Largest absolute deviation over the largest reference magnitude"""
    value = np.asarray(value, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if reference.size == 0:
        return 0.0
    scale = max(float(np.abs(reference).max()), np.finfo(np.float64).tiny)
    return float(np.abs(value - reference).max() / scale)


def _tracked(
    packet: EventPacket,
    seed: FeatureState,
    config: Config,
    on_step: Optional[Callable] = None,
) -> FeatureTracker:
    tracker = FeatureTracker(seed, config=config)
    events = iter(packet)
    for event in events:
        if tracker.feed_initial(event):
            break
    for event in events:
        outcome = tracker.process_event(event)
        if outcome.kind == StepKind.STATE_UPDATED and on_step is not None:
            on_step(tracker)
        if outcome.kind == StepKind.TERMINATED:
            break
    return tracker


def check_incremental_equivalence(
    events: int = 10_000, rng_seed: int = 0
) -> CheckResult:
    """After every step the incrementally maintained cache matches a
    recomputation from the current rows, and the stored rows match a
    from-scratch evaluation of the current template at their states"""
    packet, seed = single_star_workload(
        events, vx=20.0, vy=10.0, omega_deg=30.0, rng_seed=rng_seed
    )
    config = Config(solver_mode=SolverMode.INCREMENTAL)
    cache_error = [0.0]
    drift = [0.0]
    steps = [0]

    def compare(tracker):
        solver = tracker.solver
        cache = solver.cache
        warped = solver.warped
        rows = warped.effective_rows()
        fresh = refresh_cache_full(rows[:, :3], rows[:, 3])
        cache_error[0] = max(
            cache_error[0],
            _relative(cache.C, fresh.C),
            _relative(cache.p_t, fresh.p_t),
            _relative(cache.t_norm_sq, fresh.t_norm_sq),
        )

        values, jacobian = solver.fresh_rows()
        drift[0] = max(
            drift[0],
            _relative(warped.jacobian, jacobian),
            _relative(warped.values, values),
        )
        steps[0] += 1

    try:
        _tracked(packet, seed, config, on_step=compare)
        violated = False
    except ContractViolationError as err:
        logger.error("%s", err)
        violated = True

    tolerance = 1.0e-9
    passed = (
        not violated
        and steps[0] > 0
        and cache_error[0] <= tolerance
        and drift[0] < 1.0e-6
    )
    return CheckResult(
        name="incremental cache equivalence",
        passed=passed,
        value=max(cache_error[0], drift[0]),
        tolerance=tolerance,
        detail=f"{steps[0]} steps, cache error {cache_error[0]:.1e}, "
        f"row drift {drift[0]:.1e}, change-set bound violated: {violated}",
    )


def check_trajectory_equivalence(
    events: int = 10_000, rng_seed: int = 0
) -> CheckResult:
    """Incremental and full-recompute solvers follow the same trajectory"""
    packet, seed = single_star_workload(
        events, vx=20.0, vy=10.0, omega_deg=30.0, rng_seed=rng_seed
    )
    incremental = _tracked(packet, seed, Config(solver_mode=SolverMode.INCREMENTAL))
    full = _tracked(packet, seed, Config(solver_mode=SolverMode.FULL))

    a = incremental.record.state_array()
    b = full.record.state_array()
    if a.shape != b.shape:
        worst = np.inf
    else:
        diff = a - b
        diff[:, 2] = wrap_angle(diff[:, 2])
        worst = float(np.abs(diff).max()) if diff.size else 0.0

    tolerance = 1.0e-6
    return CheckResult(
        name="incremental/full trajectory equivalence",
        passed=worst <= tolerance,
        value=worst,
        tolerance=tolerance,
        detail=f"{len(incremental.record)} and {len(full.record)} states",
    )


def run_selftest(
    quick: bool = False, rng_seed: int = 0, stream: Optional[TextIO] = None
) -> List[CheckResult]:
    """Runs every check and prints a `PASS`/`FAIL` line per check on rank 0.

    `quick` shrinks the instance counts for a fast smoke run.
    """
    if quick:
        plan = [
            (check_bilinear_conservation, dict(samples=10_000)),
            (check_jacobian, dict(instances=50)),
            (check_closed_form_optimality, dict(instances=5, grid_points=11)),
            (check_incremental_equivalence, dict(events=500)),
            (check_trajectory_equivalence, dict(events=500)),
        ]
    else:
        plan = [
            (check_bilinear_conservation, {}),
            (check_jacobian, {}),
            (check_closed_form_optimality, {}),
            (check_incremental_equivalence, {}),
            (check_trajectory_equivalence, {}),
        ]

    bc = bash_colors()
    results = []
    for check, kwargs in plan:
        start = time.perf_counter()
        result = check(rng_seed=rng_seed, **kwargs)
        result.elapsed_s = time.perf_counter() - start
        results.append(result)
        if MPI_UTILS.rank == 0:
            print(
                f"{bc.status(result.passed)} {result.name}: "
                f"{result.value:.3e} (tolerance {result.tolerance:.0e}, "
                f"{result.elapsed_s:.2f} s) {result.detail}",
                file=stream,
            )
    return results

"""ECC alignment of an event-density model window against a persistent
template, solved in closed form with one Gauss-Newton step per event.

Every model pixel owns a row of the linearised warped template: the template
density $t_m$ and the Jacobian $J_m$ sampled at $x'_m(s_m)$, where $s_m$ is
the state the row was last evaluated at. Rows are referred to a common
linearisation state $s_{ref}$ through $u_m = t_m - J_m (s_m - s_{ref})$, so
that $t_F(s) \\approx u + J (s - s_{ref})$ around the stored states. The
solver cache keeps the Gram matrix of $[J \\mid u]$, which holds $C = J^T J$,
$p_t = J^T t_F$ and $\\|t_F\\|^2$ and moves them to any state in closed form.

A template splat re-evaluates, at the freshest state, only the rows whose
bilinear footprint meets the changed gradient pixels, and corrects the Gram
matrix by adding their new contribution and subtracting the old one.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property, lru_cache
from itertools import chain
from typing import FrozenSet, Optional, Tuple

import numpy as np
from scipy import ndimage

from ..base.buffer import EventBuffer
from ..base.density import FOOTPRINT, DensityMap, padded_footprints
from ..base.geometry import FeatureState, warp_jacobian, warp_to_template
from ..base.misc import (
    ContractViolationError,
    DegenerateWindowError,
    ShapeError,
    SolverDegenerateError,
)
from ..math import angle_difference, condition_number3, inv3
from ..mpi import MPI_RAISE_EXCEPTION

logger = logging.getLogger(__name__)

# a 2x2 density change dilated once along x and once along y
MAX_GRADIENT_CHANGES = 12
CONDITION_LIMIT = 1.0e8
DENOMINATOR_EPS = 1.0e-12
NUMERATOR_RTOL = 1.0e-10

_CENTRAL_DIFFERENCE = np.array([-0.5, 0.0, 0.5], dtype=np.float64)


class SolverMode(IntEnum):
    """How the solver follows template updates.

    `INCREMENTAL` re-evaluates the affected rows and corrects the cache;
    `FULL` rebuilds gradients, every row and the cache from scratch after
    each event and steps through the explicit pseudo-inverse.
    """

    INCREMENTAL = 1
    FULL = 2


@lru_cache(maxsize=16)
def window_offsets(radius: int) -> np.ndarray:
    """Row-major `(P, 2)` integer offsets `(dx, dy)` of a
    $(2N+1) \\times (2N+1)$ window. Row `(dy + N)(2N + 1) + dx + N`."""
    r = np.arange(-radius, radius + 1, dtype=np.int64)
    dy, dx = np.meshgrid(r, r, indexing="ij")
    offsets = np.stack([dx.ravel(), dy.ravel()], axis=1)
    offsets.setflags(write=False)
    return offsets


@lru_cache(maxsize=64)
def window_positions(radius: int, center: Tuple[int, int]) -> np.ndarray:
    """Read-only global coordinates of the pixels of the window centred on
    `center`, in the row order of `window_offsets`"""
    positions = window_offsets(radius) + np.array(center, dtype=np.float64)
    positions.setflags(write=False)
    return positions


def round_center(position) -> Tuple[int, int]:
    """Nearest pixel, with halves rounded up"""
    return math.floor(position[0] + 0.5), math.floor(position[1] + 0.5)


@dataclass
class ModelWindow:
    """Instantaneous density of the buffered events around the rounded
    feature centre.

    Attributes
    ----------
    center : Tuple[int, int]
        Global pixel the window is centred on
    density : DensityMap
        Accumulated buffer events, at offsets from `center`
    active : np.ndarray
        Mask of the window pixels holding non-zero density
    positions : np.ndarray
        `(P, 2)` global coordinates of the window pixels
    """

    center: Tuple[int, int]
    density: DensityMap

    @property
    def radius(self) -> int:
        return self.density.radius

    @property
    def vector(self) -> np.ndarray:
        return self.density.vector

    @cached_property
    def active(self) -> np.ndarray:
        return self.density.vector > 0.0

    @cached_property
    def positions(self) -> np.ndarray:
        return window_positions(self.radius, tuple(self.center))

    def normalized(self) -> np.ndarray:
        vector = self.vector
        norm = math.sqrt(float(vector @ vector))
        if norm == 0.0:
            raise DegenerateWindowError("The model window holds no density")
        return vector / norm


def build_model_window(
    buffer: EventBuffer, state: FeatureState, radius: int
) -> ModelWindow:
    """Splats every buffered event into a fresh window centred on the
    rounded feature centre.

    Raises
    ------
    DegenerateWindowError
        If no density lands inside the window
    """
    MPI_RAISE_EXCEPTION(
        condition=(not buffer.is_full),
        exception=ValueError,
        message="The model window needs a full event buffer",
    )
    center = round_center((state.x, state.y))
    density = DensityMap(radius)
    retained = density.splat_many(
        buffer.positions() - np.asarray(center, dtype=np.float64)
    )
    if retained == 0.0:
        raise DegenerateWindowError(
            f"All {len(buffer)} buffered events fall outside the model window "
            f"centred at {center}"
        )
    return ModelWindow(center=center, density=density)


class ModelWindowCache(object):
    """Model windows of one event buffer, as `build_model_window` gives them.

    Every window accumulates the footprints of all the buffered events. The
    footprint of each buffer slot is kept while the window centre stays put,
    so that after a single push only the newest slot is recomputed.

    Parameters
    ----------
    buffer : EventBuffer
        Buffer the windows are built from
    radius : int
        Window half width `N`
    reuse_footprints : bool
        Keep the footprints between calls; when `False` every window is
        built from scratch
    """

    def __init__(self, buffer: EventBuffer, radius: int, reuse_footprints: bool = True):
        self.buffer = buffer
        self.radius = int(radius)
        self.reuse_footprints = reuse_footprints
        self.wide = 2 * self.radius + 5
        self.cells = np.zeros((buffer.capacity, 4), dtype=np.int64)
        self.weights = np.zeros((buffer.capacity, 4), dtype=np.float64)
        self.center: Optional[Tuple[int, int]] = None
        self.pushed = -1

    def _footprint_newest(self, x: float, y: float) -> None:
        # scalar form of padded_footprints with a two-pixel border
        radius = self.radius
        wide = self.wide
        fx = math.floor(x)
        fy = math.floor(y)
        ax = x - fx
        ay = y - fy
        bx = min(max(fx, -radius - 2), radius + 1) + radius + 2
        by = min(max(fy, -radius - 2), radius + 1) + radius + 2
        base = by * wide + bx
        slot = self.buffer.newest_slot
        self.cells[slot] = (base, base + 1, base + wide, base + wide + 1)
        self.weights[slot] = (
            (1.0 - ax) * (1.0 - ay),
            ax * (1.0 - ay),
            (1.0 - ax) * ay,
            ax * ay,
        )

    def window(self, state: FeatureState) -> ModelWindow:
        """Model window centred on the rounded centre of `state`

        Raises
        ------
        DegenerateWindowError
            If no density lands inside the window
        """
        buffer = self.buffer
        MPI_RAISE_EXCEPTION(
            condition=(not buffer.is_full),
            exception=ValueError,
            message="The model window needs a full event buffer",
        )
        center = round_center((state.x, state.y))
        reuse = self.reuse_footprints and center == self.center
        if reuse and buffer.pushed == self.pushed + 1:
            x, y = buffer.positions()[buffer.newest_slot].tolist()
            self._footprint_newest(x - center[0], y - center[1])
        elif not reuse or buffer.pushed != self.pushed:
            cells, weights = padded_footprints(
                buffer.positions() - np.array(center, dtype=np.float64),
                self.radius,
                pad=2,
            )
            self.cells[:] = cells
            self.weights[:] = weights
        self.center = center
        self.pushed = buffer.pushed

        wide = self.wide
        grid = np.bincount(
            self.cells.ravel(), weights=self.weights.ravel(), minlength=wide * wide
        )
        density = DensityMap(self.radius)
        density.values[:] = grid.reshape(wide, wide)[2:-2, 2:-2]
        if not density.values.any():
            raise DegenerateWindowError(
                f"All {len(buffer)} buffered events fall outside the model window "
                f"centred at {center}"
            )
        return ModelWindow(center=center, density=density)


def sample_template(template: DensityMap, x_template) -> np.ndarray:
    """Bilinear template density at template-frame point(s), zero outside
    the support"""
    values = template.sample(x_template)
    if np.ndim(x_template) == 1:
        return float(values[0])
    return values


def template_gradient(template) -> Tuple[np.ndarray, np.ndarray]:
    """Central-difference gradient maps of a template, replicating the edge
    values at the border.

    Parameters
    ----------
    template : DensityMap | np.ndarray
        The template or its `(2N+1, 2N+1)` values

    Returns
    -------
    Tuple[np.ndarray, np.ndarray]
        `grad_x`, `grad_y` with the layout of the template values
    """
    values = template.values if isinstance(template, DensityMap) else template
    grad_x = ndimage.correlate1d(values, _CENTRAL_DIFFERENCE, axis=1, mode="nearest")
    grad_y = ndimage.correlate1d(values, _CENTRAL_DIFFERENCE, axis=0, mode="nearest")
    return grad_x, grad_y


def update_gradient_local(
    values: np.ndarray,
    grad_x: np.ndarray,
    grad_y: np.ndarray,
    changed,
) -> FrozenSet[Tuple[int, int]]:
    """Recomputes, in place, the gradient pixels depending on the changed
    template pixels.

    The changed pixels are handled through their bounding box, which is the
    footprint itself for the pixels of one splat.

    Returns
    -------
    FrozenSet[Tuple[int, int]]
        The offsets whose `grad_x` or `grad_y` was recomputed
    """
    if len(changed) == 0:
        return frozenset()
    size = values.shape[0]
    radius = size // 2
    last = size - 1
    x0 = min(p[0] for p in changed) + radius
    x1 = max(p[0] for p in changed) + radius
    y0 = min(p[1] for p in changed) + radius
    y1 = max(p[1] for p in changed) + radius

    # along x: columns c0..c1 of rows y0..y1, edges replicated
    c0 = max(x0 - 1, 0)
    c1 = min(x1 + 1, last)
    right = [min(c + 1, last) for c in range(c0, c1 + 1)]
    left = [max(c - 1, 0) for c in range(c0, c1 + 1)]
    band = values[y0 : y1 + 1]
    grad_x[y0 : y1 + 1, c0 : c1 + 1] = 0.5 * (band[:, right] - band[:, left])

    r0 = max(y0 - 1, 0)
    r1 = min(y1 + 1, last)
    below = [min(r + 1, last) for r in range(r0, r1 + 1)]
    above = [max(r - 1, 0) for r in range(r0, r1 + 1)]
    band = values[:, x0 : x1 + 1]
    grad_y[r0 : r1 + 1, x0 : x1 + 1] = 0.5 * (band[below] - band[above])

    touched = {
        (c - radius, r - radius) for r in range(y0, y1 + 1) for c in range(c0, c1 + 1)
    }
    touched.update(
        (c - radius, r - radius) for r in range(r0, r1 + 1) for c in range(x0, x1 + 1)
    )
    return frozenset(touched)


@dataclass(frozen=True)
class ChangeSet:
    """What a single template splat changed.

    Attributes
    ----------
    density_pixels : Tuple[Tuple[int, int], ...]
        Template offsets whose density changed, at most 4
    gradient_pixels : FrozenSet[Tuple[int, int]]
        Template offsets whose gradient changed, at most 12
    rows : np.ndarray
        Model-pixel rows whose sampling footprint meets `gradient_pixels`
    """

    density_pixels: Tuple[Tuple[int, int], ...] = ()
    gradient_pixels: FrozenSet[Tuple[int, int]] = frozenset()
    rows: np.ndarray = field(
        default_factory=lambda: np.zeros(0, dtype=np.int64), compare=False
    )

    def __post_init__(self):
        if len(self.density_pixels) > len(FOOTPRINT):
            raise ContractViolationError(
                f"A splat changes at most {len(FOOTPRINT)} template pixels, "
                f"got {len(self.density_pixels)}"
            )
        if len(self.gradient_pixels) > MAX_GRADIENT_CHANGES:
            raise ContractViolationError(
                f"A splat changes at most {MAX_GRADIENT_CHANGES} gradient "
                f"pixels, got {len(self.gradient_pixels)}"
            )

    @property
    def is_empty(self) -> bool:
        return len(self.density_pixels) == 0


def sample_stacked(
    maps: np.ndarray, radius: int, points
) -> Tuple[np.ndarray, np.ndarray]:
    """Bilinear samples of a stack of maps at template-frame points.

    Parameters
    ----------
    maps : np.ndarray
        `(k, 2N+3, 2N+3)` maps with a one-pixel zero border
    radius : int
        Half width `N` of the maps without their border
    points : array_like
        `(n, 2)` template-frame points

    Returns
    -------
    Tuple[np.ndarray, np.ndarray]
        `(k, n)` samples, zero for points outside $[-N, N]^2$, and the index
        of each footprint base into a raveled map, `-1` for points outside
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    cells, weights = padded_footprints(points, radius, pad=1)
    inside = np.abs(points).max(axis=1) <= radius
    weights *= inside[:, None]
    flat = maps.reshape(maps.shape[0], -1)
    samples = np.einsum("kij,ij->ki", flat[:, cells], weights)
    return samples, np.where(inside, cells[:, 0], -1)


def _jacobian_rows(grad_x, grad_y, points, cos, sin) -> np.ndarray:
    # [gx, gy] times dx'/ds: -R^T for the translation, (y', -x') for theta
    rows = np.empty((grad_x.shape[0], 3), dtype=np.float64)
    rows[:, 0] = sin * grad_y - cos * grad_x
    rows[:, 1] = -sin * grad_x - cos * grad_y
    rows[:, 2] = grad_x * points[:, 1] - grad_y * points[:, 0]
    return rows


def build_jacobian(
    grad_x: np.ndarray,
    grad_y: np.ndarray,
    state: FeatureState,
    model: ModelWindow,
) -> np.ndarray:
    """Jacobian of the warped template vector with respect to the state.

    Row `m` is the template gradient sampled at $x'_m(s)$ times the warp
    Jacobian of model pixel `m`; rows of inactive model pixels are zero.

    Returns
    -------
    np.ndarray
        `(P, 3)` array
    """
    radius = grad_x.shape[0] // 2
    jacobian = np.zeros((model.positions.shape[0], 3), dtype=np.float64)
    positions = model.positions[model.active]
    points = warp_to_template(positions, state)
    gradient = np.stack(
        [
            DensityMap(radius, values=grad_x).sample(points),
            DensityMap(radius, values=grad_y).sample(points),
        ],
        axis=1,
    )
    jacobian[model.active] = np.einsum(
        "pi,pij->pj", gradient, warp_jacobian(positions, state)
    )
    return jacobian


class WarpedTemplate(object):
    """Persistent linearisation of the template over the model pixels.

    Row `m` holds the template density `values[m]` and the Jacobian row
    `jacobian[m]` at the template point `points[m]` of model pixel `m`, all
    evaluated at the state the row was last refreshed at. `offsets[m]` is
    that state minus the linearisation state `state`, `trig[m]` the cosine
    and sine of its angle, and `bases[m]` the index of the footprint base in
    the bordered template maps (`-1` outside the support).

    A row keeps its values while its model pixel is inactive; only its share
    of the cache switches to $[0 \\mid t_m]$.

    Parameters
    ----------
    radius : int
        Window half width `N`
    """

    def __init__(self, radius: int):
        self.__radius = int(radius)
        npix = self.size * self.size
        self.values = np.zeros(npix, dtype=np.float64)
        self.jacobian = np.zeros((npix, 3), dtype=np.float64)
        self.points = np.zeros((npix, 2), dtype=np.float64)
        self.trig = np.zeros((npix, 2), dtype=np.float64)
        self.offsets = np.zeros((npix, 3), dtype=np.float64)
        self.bases = np.full(npix, -1, dtype=np.int64)
        self.active = np.zeros(npix, dtype=bool)
        self.state: Optional[FeatureState] = None
        self.model: Optional[ModelWindow] = None

    @property
    def radius(self) -> int:
        return self.__radius

    @property
    def size(self) -> int:
        return 2 * self.__radius + 1

    @property
    def center(self) -> Optional[Tuple[int, int]]:
        return None if self.model is None else self.model.center

    def offset(self, state: FeatureState) -> np.ndarray:
        """`state` minus the linearisation state, angle wrapped"""
        ref = self.state
        return np.array(
            [
                state.x - ref.x,
                state.y - ref.y,
                angle_difference(state.theta, ref.theta),
            ]
        )

    def relinearize(
        self, maps: np.ndarray, state: FeatureState, model: ModelWindow
    ) -> None:
        """Makes `state` the linearisation state and evaluates every row at it"""
        self.state = state
        self.follow(model)
        self.evaluate(maps, slice(None), state)

    def follow(self, model: ModelWindow) -> np.ndarray:
        """Adopts the activity mask of `model`, a window with the same centre.
        Returns the rows whose activity changed."""
        toggled = np.flatnonzero(model.active != self.active)
        self.model = model
        self.active = model.active
        return toggled

    def evaluate(self, maps: np.ndarray, rows, state: FeatureState) -> None:
        """Samples the template and its gradient for `rows` under `state`"""
        c = math.cos(state.theta)
        s = math.sin(state.theta)
        d = self.model.positions[rows] - np.array([state.x, state.y])
        points = d @ np.array([[c, -s], [s, c]])
        samples, bases = sample_stacked(maps, self.radius, points)
        self.values[rows] = samples[0]
        self.jacobian[rows] = _jacobian_rows(samples[1], samples[2], points, c, s)
        self.points[rows] = points
        self.trig[rows] = (c, s)
        self.offsets[rows] = self.offset(state)
        self.bases[rows] = bases

    def sample_rows(self, maps: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Template values and Jacobian rows of every row at its stored state"""
        samples, _ = sample_stacked(maps, self.radius, self.points)
        jacobian = _jacobian_rows(
            samples[1], samples[2], self.points, self.trig[:, 0], self.trig[:, 1]
        )
        return samples[0], jacobian

    def resample(self, maps: np.ndarray) -> None:
        self.values[:], self.jacobian[:] = self.sample_rows(maps)

    def effective_rows(self, rows=slice(None)) -> np.ndarray:
        """Cache rows $[J_m \\mid u_m]$ under the current activity mask, with
        $u_m = t_m - J_m (s_m - s_{ref})$; inactive pixels give
        $[0 \\mid t_m]$"""
        active = self.active[rows]
        jacobian = self.jacobian[rows] * active[:, None]
        block = np.empty((active.shape[0], 4), dtype=np.float64)
        block[:, :3] = jacobian
        block[:, 3] = self.values[rows] - np.einsum(
            "ij,ij->i", jacobian, self.offsets[rows]
        )
        return block

    def affected_rows(self, gradient_pixels) -> np.ndarray:
        """Rows whose bilinear footprint, at the state they were evaluated
        at, meets `gradient_pixels`"""
        if len(gradient_pixels) == 0:
            return np.zeros(0, dtype=np.int64)
        radius = self.radius
        wide = self.size + 2
        # base b has pixel p in its footprint when p - (1, 1) <= b <= p
        hit = np.zeros((wide, wide), dtype=bool)
        for dx, dy in gradient_pixels:
            hit[dy + radius : dy + radius + 2, dx + radius : dx + radius + 2] = True
        return np.flatnonzero(hit.ravel()[self.bases])


def ecc_cost(t: np.ndarray, m: np.ndarray) -> float:
    """$\\| t / \\|t\\| - m / \\|m\\| \\|^2 = 2 (1 - \\rho)$

    Raises
    ------
    DegenerateWindowError
        If either vector has zero norm
    """
    t_norm = np.linalg.norm(t)
    m_norm = np.linalg.norm(m)
    if t_norm == 0.0 or m_norm == 0.0:
        raise DegenerateWindowError("ECC is undefined for a zero-norm window")
    diff = t / t_norm - m / m_norm
    return float(diff @ diff)


@dataclass
class EccCache:
    """Normal-equation quantities of the linearised ECC objective.

    The rows $[J \\mid t]$ are stored together with their Gram matrix,
    which holds $C = J^T J$, $p_t = J^T t$ and $\\|t\\|^2$. $A = C^{-1} J^T$
    is never formed: the step only needs $C^{-1}$ applied to $p_t$ and
    $J^T \\hat{m}$.

    Attributes
    ----------
    rows : np.ndarray
        `(P, 4)` rows $[J_m \\mid t_m]$, with $t$ referred to the
        linearisation state
    gram : np.ndarray
        `rows.T @ rows`
    """

    rows: np.ndarray
    gram: np.ndarray

    @property
    def J(self) -> np.ndarray:
        return self.rows[:, :3]

    @property
    def t(self) -> np.ndarray:
        return self.rows[:, 3]

    @property
    def C(self) -> np.ndarray:
        return self.gram[:3, :3]

    @property
    def p_t(self) -> np.ndarray:
        return self.gram[:3, 3]

    @property
    def t_norm_sq(self) -> float:
        return float(self.gram[3, 3])

    def replace_rows(self, rows: np.ndarray, block: np.ndarray) -> None:
        """Swaps in new rows and corrects the Gram matrix by the difference
        of their contributions"""
        old = self.rows[rows]
        self.gram += block.T @ block - old.T @ old
        self.rows[rows] = block


def refresh_cache_full(J: np.ndarray, t_F: np.ndarray) -> EccCache:
    """Builds the cache from scratch"""
    if J.ndim != 2 or J.shape[1] != 3 or t_F.shape != (J.shape[0],):
        raise ShapeError(
            f"Jacobian of shape {J.shape} does not match a template vector of "
            f"shape {t_F.shape}"
        )
    rows = np.empty((J.shape[0], 4), dtype=np.float64)
    rows[:, :3] = J
    rows[:, 3] = t_F
    return EccCache(rows=rows, gram=rows.T @ rows)


@dataclass
class StepSolution:
    """Closed-form minimiser of the linearised objective.

    Attributes
    ----------
    delta : np.ndarray
        Optimal perturbation about the state the objective was linearised at
    lam : float
        The scale $\\lambda$ of the normalised model
    rho : float
        Correlation coefficient $\\langle t_F, \\hat{m} \\rangle / \\|t_F\\|$
    condition : float
        Frobenius condition number of $C$
    """

    delta: np.ndarray
    lam: float
    rho: float
    condition: float


def _solve_lambda(C, p_t, p_m, t_norm_sq: float, t_dot_m: float):
    """$C^{-1}$, $\\lambda$ and the condition number, refusing the
    degenerate configurations"""
    if t_norm_sq <= 0.0:
        raise SolverDegenerateError("The warped template has zero norm")
    C_inv = inv3(C)
    condition = condition_number3(C, C_inv)
    if not condition < CONDITION_LIMIT:
        raise SolverDegenerateError(
            f"Ill-conditioned normal matrix, condition number {condition:.3e}"
        )
    x_t = C_inv @ p_t
    numerator = t_norm_sq - float(p_t @ x_t)
    if numerator <= NUMERATOR_RTOL * t_norm_sq:
        raise SolverDegenerateError(
            "The warped template lies in the column span of the Jacobian"
        )
    denominator = t_dot_m - float(p_m @ x_t)
    if denominator <= DENOMINATOR_EPS:
        raise SolverDegenerateError(
            f"Non-positive lambda denominator {denominator:.3e}"
        )
    return C_inv, numerator / denominator, condition


def closed_form_step(
    cache: EccCache, m_hat: np.ndarray, shift: Optional[np.ndarray] = None
) -> StepSolution:
    """Minimises $\\| (t + J \\delta) / \\|t + J \\delta\\| - \\hat{m} \\|^2$
    over $\\delta$, with $t = t_{ref} + J\\,$`shift` the template at the state
    `shift` away from the linearisation state.

    $\\lambda = (\\|t\\|^2 - p_t^T C^{-1} p_t) / (\\langle t, \\hat{m} \\rangle
    - p_t^T C^{-1} p_{\\hat{m}})$ and $\\delta = C^{-1}(\\lambda p_{\\hat{m}} - p_t)$
    with $p_{\\hat{m}} = J^T \\hat{m}$.

    Raises
    ------
    SolverDegenerateError
        When $C$ is ill-conditioned, when $t$ lies in the column span of
        $J$, or when the denominator of $\\lambda$ is not positive
    """
    if m_hat.shape != (cache.rows.shape[0],):
        raise ShapeError(
            f"A model vector of shape {m_hat.shape} does not match a cache "
            f"with {cache.rows.shape[0]} rows"
        )
    projection = cache.rows.T @ m_hat
    p_m = projection[:3]
    t_dot_m = float(projection[3])
    C = cache.C
    p_t = cache.p_t
    t_norm_sq = cache.t_norm_sq
    if shift is not None:
        Cd = C @ shift
        t_norm_sq += float(shift @ (2.0 * p_t + Cd))
        p_t = p_t + Cd
        t_dot_m += float(p_m @ shift)

    C_inv, lam, condition = _solve_lambda(C, p_t, p_m, t_norm_sq, t_dot_m)
    return StepSolution(
        delta=C_inv @ (lam * p_m - p_t),
        lam=lam,
        rho=t_dot_m / math.sqrt(t_norm_sq),
        condition=condition,
    )


def pseudo_inverse_step(
    J: np.ndarray, t_F: np.ndarray, m_hat: np.ndarray
) -> StepSolution:
    """The step $\\delta = A (\\lambda \\hat{m} - t_F)$ through the explicit
    pseudo-inverse $A = C^{-1} J^T$, with every quantity computed from the
    full vectors.

    Raises
    ------
    SolverDegenerateError
        In the cases `closed_form_step` refuses
    """
    if J.ndim != 2 or J.shape[1] != 3 or t_F.shape != (J.shape[0],) or m_hat.shape != t_F.shape:
        raise ShapeError(
            f"Jacobian of shape {J.shape} does not match vectors of shapes "
            f"{t_F.shape} and {m_hat.shape}"
        )
    C = J.T @ J
    t_norm_sq = float(t_F @ t_F)
    t_dot_m = float(t_F @ m_hat)
    C_inv, lam, condition = _solve_lambda(C, J.T @ t_F, J.T @ m_hat, t_norm_sq, t_dot_m)
    A = C_inv @ J.T
    return StepSolution(
        delta=A @ (lam * m_hat - t_F),
        lam=lam,
        rho=t_dot_m / math.sqrt(t_norm_sq),
        condition=condition,
    )


def update_cache_incremental(
    cache: EccCache,
    changes: ChangeSet,
    jacobian_rows: np.ndarray,
    template_rows: np.ndarray,
) -> EccCache:
    """Replaces the rows `changes.rows` of the cache and corrects it by the
    difference of their contributions. Rows outside the change set keep
    their stored values. `cache` is updated in place.

    Raises
    ------
    ContractViolationError
        If the change set refers to pixels or rows outside the window
    ShapeError
        If the new rows do not match `changes.rows`
    """
    rows = changes.rows
    if rows.size == 0:
        return cache

    nrows = cache.rows.shape[0]
    radius = (math.isqrt(nrows) - 1) // 2
    outside = any(
        abs(dx) > radius or abs(dy) > radius
        for dx, dy in chain(changes.density_pixels, changes.gradient_pixels)
    )
    if outside or rows.min() < 0 or rows.max() >= nrows:
        raise ContractViolationError(
            "The change set refers to pixels outside the template support"
        )
    if jacobian_rows.shape != (rows.size, 3) or template_rows.shape != (rows.size,):
        raise ShapeError(
            f"Expected {rows.size} new rows, got Jacobian rows of shape "
            f"{jacobian_rows.shape} and template rows of shape {template_rows.shape}"
        )

    block = np.empty((rows.size, 4), dtype=np.float64)
    block[:, :3] = jacobian_rows
    block[:, 3] = template_rows
    cache.replace_rows(rows, block)
    return cache


class EccSolver(object):
    """Template, gradient maps, warped template and cache of one feature.

    Template and gradients live in one `(3, 2N+3, 2N+3)` stack with a zero
    border; `template.values`, `grad_x` and `grad_y` are views into it.

    Parameters
    ----------
    radius : int
        Window half width `N`
    mode : SolverMode
        `INCREMENTAL` or `FULL`
    relinearize_px : float
        Translation away from the linearisation state that triggers a
        relinearisation
    relinearize_deg : float
        Rotation, in degrees, that triggers a relinearisation
    refresh_every : int
        Accepted events between two forced relinearisations
    """

    def __init__(
        self,
        radius: int,
        mode: SolverMode = SolverMode.INCREMENTAL,
        relinearize_px: float = 0.5,
        relinearize_deg: float = 1.0,
        refresh_every: int = 1000,
    ):
        size = 2 * radius + 1
        self.maps = np.zeros((3, size + 2, size + 2), dtype=np.float64)
        self.template = DensityMap(radius, values=self.maps[0, 1:-1, 1:-1])
        self.grad_x = self.maps[1, 1:-1, 1:-1]
        self.grad_y = self.maps[2, 1:-1, 1:-1]
        self.warped = WarpedTemplate(radius)
        self.cache: Optional[EccCache] = None
        self.mode = SolverMode(mode)
        self.relinearize_px = relinearize_px
        self.relinearize_rad = math.radians(relinearize_deg)
        self.refresh_every = refresh_every
        self.events_since_refresh = 0
        self.relinearizations = 0

    @property
    def radius(self) -> int:
        return self.template.radius

    @property
    def reference_state(self) -> Optional[FeatureState]:
        return self.warped.state

    def _refresh_gradient(self) -> None:
        grad_x, grad_y = template_gradient(self.template)
        self.grad_x[...] = grad_x
        self.grad_y[...] = grad_y

    def _full_cache(self) -> EccCache:
        rows = self.warped.effective_rows()
        return refresh_cache_full(rows[:, :3], rows[:, 3])

    def needs_relinearization(self, state: FeatureState, model: ModelWindow) -> bool:
        if self.cache is None or self.warped.center != model.center:
            return True
        if self.events_since_refresh >= self.refresh_every:
            return True
        ref = self.warped.state
        shift = math.hypot(state.x - ref.x, state.y - ref.y)
        turn = abs(angle_difference(state.theta, ref.theta))
        return shift > self.relinearize_px or turn > self.relinearize_rad

    def relinearize(self, state: FeatureState, model: ModelWindow) -> EccCache:
        self._refresh_gradient()
        self.warped.relinearize(self.maps, state, model)
        self.cache = self._full_cache()
        self.events_since_refresh = 0
        self.relinearizations += 1
        logger.debug(
            "relinearised at (%.3f, %.3f, %.5f), window centre %s",
            state.x,
            state.y,
            state.theta,
            model.center,
        )
        return self.cache

    def attach_model(self, state: FeatureState, model: ModelWindow) -> bool:
        """Brings rows and cache to the activity mask of `model`,
        relinearising at `state` when `needs_relinearization` asks for it.
        Returns whether it relinearised."""
        if self.needs_relinearization(state, model):
            self.relinearize(state, model)
            return True
        toggled = self.warped.follow(model)
        if toggled.size > 0:
            if self.mode == SolverMode.FULL:
                self.cache = self._full_cache()
            else:
                self.cache.replace_rows(toggled, self.warped.effective_rows(toggled))
        return False

    def step(self, model: ModelWindow, state: Optional[FeatureState] = None) -> StepSolution:
        """One closed-form step towards `model`, about `state` (by default
        the linearisation state)"""
        m_hat = model.normalized()
        shift = None if state is None else self.warped.offset(state)
        if self.mode == SolverMode.FULL:
            J = self.cache.J
            t_F = self.cache.t if shift is None else self.cache.t + J @ shift
            return pseudo_inverse_step(J, t_F, m_hat)
        return closed_form_step(self.cache, m_hat, shift)

    def splat_template(self, x_template) -> ChangeSet:
        """Adds one event to the template and reports what it changed"""
        touched = self.template.splat(x_template)
        if not touched:
            return ChangeSet()
        changed = update_gradient_local(
            self.template.values, self.grad_x, self.grad_y, touched
        )
        return ChangeSet(
            density_pixels=tuple(touched),
            gradient_pixels=changed,
            rows=self.warped.affected_rows(changed),
        )

    def update_cache(
        self, changes: ChangeSet, state: Optional[FeatureState] = None
    ) -> EccCache:
        """Folds a template splat into rows and cache; the affected rows are
        re-evaluated at `state`, by default the linearisation state"""
        self.events_since_refresh += 1
        state = self.warped.state if state is None else state
        rows = changes.rows
        if rows.size > 0:
            self.warped.evaluate(self.maps, rows, state)

        if self.mode == SolverMode.FULL:
            self._refresh_gradient()
            self.warped.resample(self.maps)
            self.cache = self._full_cache()
            return self.cache

        if rows.size == 0:
            return self.cache
        block = self.warped.effective_rows(rows)
        return update_cache_incremental(self.cache, changes, block[:, :3], block[:, 3])

    def fresh_rows(self) -> Tuple[np.ndarray, np.ndarray]:
        """Template values and Jacobian rows recomputed from the template
        alone at the stored row states, leaving the solver untouched"""
        maps = self.maps.copy()
        grad_x, grad_y = template_gradient(self.template)
        maps[1, 1:-1, 1:-1] = grad_x
        maps[2, 1:-1, 1:-1] = grad_y
        return self.warped.sample_rows(maps)

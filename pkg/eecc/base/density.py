"""Bilinear event accumulation on square density windows."""

import math
from typing import List, Optional, Tuple

import numpy as np

from ..math import DTypeFloat
from ..mpi import MPI_RAISE_EXCEPTION

from .misc import ShapeError

# (dx, dy) offsets of the four-pixel neighbourhood, in the order
# n, n + v1, n + v2, n + v1 + v2
FOOTPRINT = ((0, 0), (1, 0), (0, 1), (1, 1))
_FOOTPRINT_DX = np.array([0, 1, 0, 1], dtype=np.int64)
_FOOTPRINT_DY = np.array([0, 0, 1, 1], dtype=np.int64)


def bilinear_weights(x) -> Tuple[Tuple[int, int], np.ndarray]:
    """Base pixel and the four bilinear weights of a real point.

    Parameters
    ----------
    x : array_like
        Point `(x, y)`

    Returns
    -------
    Tuple[Tuple[int, int], np.ndarray]
        `n = floor(x)` and the weights at `n`, `n + v1`, `n + v2`,
        `n + v1 + v2`; non-negative and summing to one
    """
    fx = np.floor(x[0])
    fy = np.floor(x[1])
    ax = x[0] - fx
    ay = x[1] - fy
    weights = np.array(
        [
            (1.0 - ax) * (1.0 - ay),
            ax * (1.0 - ay),
            (1.0 - ax) * ay,
            ax * ay,
        ],
        dtype=np.float64,
    )
    return (int(fx), int(fy)), weights


def bilinear_weights_batch(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised `bilinear_weights` for an `(n, 2)` array of points.

    Returns
    -------
    Tuple[np.ndarray, np.ndarray]
        Integer bases of shape `(n, 2)` and weights of shape `(n, 4)`
    """
    points = np.asarray(points, dtype=np.float64)
    floors = np.floor(points)
    frac = points - floors
    ax = frac[:, 0]
    ay = frac[:, 1]
    weights = np.stack(
        [
            (1.0 - ax) * (1.0 - ay),
            ax * (1.0 - ay),
            (1.0 - ax) * ay,
            ax * ay,
        ],
        axis=1,
    )
    return floors.astype(np.int64), weights


def padded_footprints(points, radius: int, pad: int = 2) -> Tuple[np.ndarray, np.ndarray]:
    """Flat indices and weights of the bilinear footprints of `points` on a
    window widened by `pad` pixels on every side.

    Footprint bases are clipped to $[-N - pad, N + pad - 1]$; with `pad` of
    two, a clipped footprint lies entirely in the border, so cropping the
    border drops exactly the contributions falling outside the window.

    Returns
    -------
    Tuple[np.ndarray, np.ndarray]
        Indices into the raveled `(2N + 1 + 2 pad)`-wide grid and the
        matching weights, both of shape `(n, 4)`
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    wide = 2 * (radius + pad) + 1
    floors = np.floor(points)
    frac = points - floors
    np.clip(floors, -radius - pad, radius + pad - 1, out=floors)
    base = (floors @ np.array([1.0, wide])).astype(np.int64)
    base += (radius + pad) * (wide + 1)
    cells = base[:, None] + np.array([0, 1, wide, wide + 1], dtype=np.int64)

    lo_hi = np.stack([1.0 - frac, frac], axis=2)
    # [y weight][x weight], row-major as FOOTPRINT
    weights = (lo_hi[:, 1, :, None] * lo_hi[:, 0, None, :]).reshape(-1, 4)
    return cells, weights


def sample_map(values: np.ndarray, radius: int, points) -> np.ndarray:
    """Bilinear interpolation of a window at real offsets.

    Points outside $[-N, N]^2$ sample to zero, and neighbours beyond the
    window contribute zero.

    Parameters
    ----------
    values : np.ndarray
        `(2N+1, 2N+1)` array indexed `[y + N, x + N]`
    radius : int
        Half width `N`
    points : array_like
        Offsets of shape `(n, 2)`

    Returns
    -------
    np.ndarray
        `n` interpolated values
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    bases, weights = bilinear_weights_batch(points)
    inside = np.all(np.abs(points) <= radius, axis=1)

    size = 2 * radius + 1
    ix = bases[:, 0:1] + _FOOTPRINT_DX + radius
    iy = bases[:, 1:2] + _FOOTPRINT_DY + radius
    valid = (ix >= 0) & (ix < size) & (iy >= 0) & (iy < size) & inside[:, None]

    flat = values.ravel()
    idx = np.where(valid, iy * size + ix, 0)
    return np.sum(np.where(valid, flat[idx] * weights, 0.0), axis=1)


class DensityMap(object):
    """A $(2N+1) \\times (2N+1)$ grid accumulating bilinear event
    contributions. Offsets $n' \\in [-N, N]^2$ are stored at
    `values[n'_y + N, n'_x + N]`, so `vector` is row-major over offsets.

    Parameters
    ----------
    radius : int
        Half width `N`
    dtype : DTypeFloat, optional
        dtype of the accumulation grid, by default `np.float64`
    values : np.ndarray, optional
        `(2N+1, 2N+1)` storage to accumulate into, for instance a view into
        a larger array. A zeroed grid is allocated when `None`
    """

    def __init__(
        self,
        radius: int,
        dtype: DTypeFloat = np.float64,
        values: Optional[np.ndarray] = None,
    ):
        MPI_RAISE_EXCEPTION(
            condition=(int(radius) < 1),
            exception=ValueError,
            message=f"`radius` must be a positive integer, got {radius}",
        )
        self.__radius = int(radius)
        if values is None:
            values = np.zeros((self.size, self.size), dtype=dtype)
        elif values.shape != (self.size, self.size):
            raise ShapeError(
                f"Storage of shape {values.shape} does not hold a window of "
                f"radius {radius}"
            )
        self.values = values

    @property
    def radius(self) -> int:
        return self.__radius

    @property
    def size(self) -> int:
        return 2 * self.__radius + 1

    @property
    def vector(self) -> np.ndarray:
        return self.values.ravel()

    @property
    def mass(self) -> float:
        return float(self.values.sum())

    def contains(self, dx: int, dy: int) -> bool:
        return abs(dx) <= self.radius and abs(dy) <= self.radius

    def copy(self) -> "DensityMap":
        other = DensityMap(self.radius, dtype=self.values.dtype)
        other.values[:] = self.values
        return other

    def splat(self, x) -> List[Tuple[int, int]]:
        """Adds one event at the real offset `x`.

        Contributions falling outside the window are dropped.

        Returns
        -------
        List[Tuple[int, int]]
            In-bounds footprint offsets `(dx, dy)`, at most four
        """
        x0 = float(x[0])
        y0 = float(x[1])
        bx = math.floor(x0)
        by = math.floor(y0)
        ax = x0 - bx
        ay = y0 - by
        weights = ((1.0 - ax) * (1.0 - ay), ax * (1.0 - ay), (1.0 - ax) * ay, ax * ay)

        radius = self.__radius
        values = self.values
        touched = []
        for (ox, oy), w in zip(FOOTPRINT, weights):
            px = bx + ox
            py = by + oy
            if -radius <= px <= radius and -radius <= py <= radius:
                values[py + radius, px + radius] += w
                touched.append((px, py))
        return touched

    def splat_many(self, points: np.ndarray) -> float:
        """Adds one event at every row of `points`. Returns the retained mass."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        if len(points) == 0:
            return 0.0
        cells, weights = padded_footprints(points, self.radius, pad=2)
        wide = self.size + 4
        grid = np.bincount(cells.ravel(), weights=weights.ravel(), minlength=wide * wide)
        kept = grid.reshape(wide, wide)[2:-2, 2:-2]
        self.values += kept
        return float(kept.sum())

    def sample(self, points) -> np.ndarray:
        """Bilinear samples at real offsets, zero outside the window"""
        return sample_map(self.values, self.radius, points)

    def sharpness(self, threshold: float = 0.05) -> float:
        """Fraction of the window holding more than `threshold` times the peak
        value; small for a crisp template, close to one for a blurred or
        noisy one. `nan` for an empty window."""
        MPI_RAISE_EXCEPTION(
            condition=not (0.0 <= threshold < 1.0),
            exception=ValueError,
            message=f"`threshold` must lie in [0, 1), got {threshold}",
        )
        peak = self.values.max()
        if peak <= 0.0:
            return float("nan")
        return float(np.count_nonzero(self.values > threshold * peak) / self.values.size)

"""Events, feature states and the Euclidean warp between the image plane and
the template frame of a feature."""

from dataclasses import dataclass

import numpy as np

from ..math import wrap_angle


@dataclass(frozen=True)
class Event:
    """A single sensor event.

    Attributes
    ----------
    t_us : int
        Timestamp in integer microseconds
    x : float
        Column coordinate in the rectified image plane (pixels)
    y : float
        Row coordinate in the rectified image plane (pixels)
    polarity : int
        +1 or -1. Carried along but never used by the tracker
    """

    t_us: int
    x: float
    y: float
    polarity: int = 1

    @property
    def t(self) -> float:
        """Timestamp in seconds"""
        return self.t_us * 1.0e-6

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass(frozen=True)
class FeatureState:
    """Warp parameters $[x_F, y_F, \\theta_F]$ of a tracked feature.

    `theta` is wrapped to $(-\\pi, \\pi]$ on construction.
    """

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "FeatureState":
        return cls(x=values[0], y=values[1], theta=values[2])


def rotation_matrix(theta: float) -> np.ndarray:
    """$R(\\theta) = [[\\cos\\theta, -\\sin\\theta], [\\sin\\theta, \\cos\\theta]]$"""
    c = np.cos(theta)
    s = np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=np.float64)


def warp_to_template(x, state: FeatureState) -> np.ndarray:
    """Maps image points into the template frame, $x' = R^T(\\theta_F)(x - x_F)$.

    Parameters
    ----------
    x : array_like
        A point of shape `(2,)` or a batch of shape `(n, 2)`
    state : FeatureState
        Current feature state

    Returns
    -------
    np.ndarray
        Template-frame point(s), same shape as `x`
    """
    rot = rotation_matrix(state.theta)
    # row vectors: (R^T v)^T = v^T R
    return (np.asarray(x, dtype=np.float64) - state.position) @ rot


def warp_from_template(x_template, state: FeatureState) -> np.ndarray:
    """Inverse of `warp_to_template`, $x = R(\\theta_F) x' + x_F$."""
    rot = rotation_matrix(state.theta)
    return np.asarray(x_template, dtype=np.float64) @ rot.T + state.position


def warp_jacobian(n, state: FeatureState) -> np.ndarray:
    """Derivative of `warp_to_template(n, s)` with respect to `s`.

    Parameters
    ----------
    n : array_like
        Image point of shape `(2,)` or batch `(k, 2)`
    state : FeatureState
        Point of evaluation

    Returns
    -------
    np.ndarray
        `(2, 3)` matrix (or `(k, 2, 3)` batch) with columns
        $\\partial x'/\\partial x_F$, $\\partial x'/\\partial y_F$,
        $\\partial x'/\\partial \\theta_F$
    """
    c = np.cos(state.theta)
    s = np.sin(state.theta)
    d = np.asarray(n, dtype=np.float64) - state.position
    dx = d[..., 0]
    dy = d[..., 1]

    jac = np.empty(d.shape[:-1] + (2, 3), dtype=np.float64)
    # -R^T
    jac[..., 0, 0] = -c
    jac[..., 0, 1] = -s
    jac[..., 1, 0] = s
    jac[..., 1, 1] = -c
    # dR^T/dtheta (n - x_F)
    jac[..., 0, 2] = -s * dx + c * dy
    jac[..., 1, 2] = -c * dx - s * dy
    return jac


def in_neighborhood(x, state: FeatureState, radius: float) -> bool:
    """Closed Euclidean ball test $\\|x - x_F\\|_2 \\leq N$."""
    dx = x[0] - state.x
    dy = x[1] - state.y
    return bool(dx * dx + dy * dy <= radius * radius)

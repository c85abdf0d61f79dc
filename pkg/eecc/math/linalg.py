import math

import numpy as np

_TWO_PI = 2.0 * math.pi


def wrap_angle(theta):
    """Wraps an angle (or array of angles) to the interval $(-\\pi, \\pi]$

    Parameters
    ----------
    theta : float | np.ndarray
        Angle in radians

    Returns
    -------
    float | np.ndarray
        The equivalent angle in $(-\\pi, \\pi]$
    """
    if isinstance(theta, (float, int)):
        # float % follows the sign of the divisor, as np.mod does
        return math.pi - (math.pi - float(theta)) % _TWO_PI
    wrapped = np.pi - np.mod(np.pi - np.asarray(theta, dtype=np.float64), _TWO_PI)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def angle_difference(a, b):
    """Wrapped difference `a - b`"""
    if isinstance(a, (float, int)) and isinstance(b, (float, int)):
        return wrap_angle(float(a) - float(b))
    return wrap_angle(np.asarray(a) - np.asarray(b))


def inv3(matrix) -> np.ndarray:
    """Closed-form inverse of a 3x3 matrix through its adjugate.

    Parameters
    ----------
    matrix : array_like
        A 3x3 array

    Returns
    -------
    np.ndarray
        The inverse of `matrix`. Entries are `inf`/`nan` when the
        determinant vanishes; callers check conditioning first.
    """
    (a00, a01, a02), (a10, a11, a12), (a20, a21, a22) = np.asarray(
        matrix, dtype=np.float64
    ).tolist()
    c00 = a11 * a22 - a12 * a21
    c01 = a12 * a20 - a10 * a22
    c02 = a10 * a21 - a11 * a20
    c10 = a02 * a21 - a01 * a22
    c11 = a00 * a22 - a02 * a20
    c12 = a01 * a20 - a00 * a21
    c20 = a01 * a12 - a02 * a11
    c21 = a02 * a10 - a00 * a12
    c22 = a00 * a11 - a01 * a10

    det = a00 * c00 + a01 * c01 + a02 * c02
    adjugate = np.array(
        [[c00, c10, c20], [c01, c11, c21], [c02, c12, c22]], dtype=np.float64
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        return adjugate / det


def condition_number3(matrix: np.ndarray, inverse: np.ndarray) -> float:
    """Frobenius-norm condition number $\\|C\\|_F \\|C^{-1}\\|_F$, an upper
    bound of the spectral one. Returns `inf` for a singular matrix."""
    inverse_sq = float(np.vdot(inverse, inverse))
    if not math.isfinite(inverse_sq):
        return math.inf
    return math.sqrt(float(np.vdot(matrix, matrix)) * inverse_sq)

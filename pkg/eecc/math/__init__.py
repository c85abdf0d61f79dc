from numpy import _typing

from .linalg import wrap_angle, angle_difference, inv3, condition_number3

DTypeFloat = _typing._DTypeLikeFloat

__all__ = [
    "wrap_angle",
    "angle_difference",
    "inv3",
    "condition_number3",
    "DTypeFloat",
]

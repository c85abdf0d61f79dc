from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from .geometry import FeatureState


class TerminationReason(str, Enum):
    """Why a track ended. The value is what track files store."""

    OUT_OF_BOUNDS = "out_of_bounds"
    DEGENERATE = "degenerate"
    LOST = "lost"
    IDLE = "idle"
    END_OF_STREAM = "end_of_stream"
    INIT_STARVED = "init_starved"


@dataclass
class TrackRecord:
    """States of one feature, each stamped with the time of the event it
    motion-compensates. The first entry is the seed state. Stamps strictly
    increase: a state whose event shares the previous stamp is moved one
    microsecond later."""

    feature_id: int
    times_us: List[int] = field(default_factory=list)
    states: List[FeatureState] = field(default_factory=list)
    reason: Optional[TerminationReason] = None

    def __len__(self) -> int:
        return len(self.states)

    def append(self, t_us: int, state: FeatureState) -> None:
        self.times_us.append(int(t_us))
        self.states.append(state)

    @property
    def age_s(self) -> float:
        if not self.times_us:
            return 0.0
        return (self.times_us[-1] - self.times_us[0]) * 1.0e-6

    def times_s(self) -> np.ndarray:
        return np.asarray(self.times_us, dtype=np.int64) * 1.0e-6

    def state_array(self) -> np.ndarray:
        """`(n, 3)` array of `[x, y, theta]`"""
        if not self.states:
            return np.zeros((0, 3), dtype=np.float64)
        return np.array([s.as_array() for s in self.states])

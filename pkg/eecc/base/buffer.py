import numpy as np
from typing import Optional

from .geometry import Event
from .misc import EventOrderError

from ..mpi import MPI_RAISE_EXCEPTION


class EventBuffer(object):
    """Circular buffer holding the $2M+1$ most recent accepted events.

    Storage is a set of preallocated numpy columns written at a moving head,
    so a push is O(1) and the model window can read the positions without
    copying Python objects.

    Parameters
    ----------
    capacity : int
        Number of slots, $2M+1$. Must be odd

    Attributes
    ----------
    capacity : int
        Number of slots
    half_size : int
        `M`; the central event is the `M`-th oldest
    pushed : int
        Events pushed since construction
    """

    def __init__(self, capacity: int = 193):
        MPI_RAISE_EXCEPTION(
            condition=(capacity < 1 or capacity % 2 == 0),
            exception=ValueError,
            message=f"`capacity` must be a positive odd number, got {capacity}",
        )
        self.__capacity = int(capacity)
        self.__t_us = np.zeros(capacity, dtype=np.int64)
        self.__xy = np.zeros((capacity, 2), dtype=np.float64)
        self.__polarity = np.zeros(capacity, dtype=np.int8)
        self.__head = 0  # slot of the oldest event once full
        self.__length = 0
        self.pushed = 0

    @property
    def capacity(self) -> int:
        return self.__capacity

    @property
    def half_size(self) -> int:
        return self.__capacity // 2

    @property
    def is_full(self) -> bool:
        return self.__length == self.__capacity

    @property
    def newest_t_us(self) -> Optional[int]:
        if self.__length == 0:
            return None
        return int(self.__t_us[self._slot(self.__length - 1)])

    @property
    def newest_slot(self) -> int:
        """Storage slot written by the last push"""
        return self._slot(self.__length - 1)

    def __len__(self) -> int:
        return self.__length

    def _slot(self, age_index: int) -> int:
        """Storage slot of the `age_index`-th oldest event"""
        if self.__length < self.__capacity:
            return age_index
        return (self.__head + age_index) % self.__capacity

    def push(self, event: Event) -> Optional[Event]:
        """Appends `event`, evicting the oldest one when full.

        Raises
        ------
        EventOrderError
            If `event` is older than the newest buffered event. The buffer
            is left untouched.

        Returns
        -------
        Optional[Event]
            The evicted event, `None` while the buffer is filling up
        """
        newest = self.newest_t_us
        if newest is not None and event.t_us < newest:
            raise EventOrderError(
                f"event at {event.t_us} us is older than the newest buffered "
                f"event at {newest} us"
            )

        if self.__length < self.__capacity:
            slot = self.__length
            self.__length += 1
            evicted = None
        else:
            slot = self.__head
            evicted = self[0]
            self.__head = (self.__head + 1) % self.__capacity

        self.__t_us[slot] = event.t_us
        self.__xy[slot, 0] = event.x
        self.__xy[slot, 1] = event.y
        self.__polarity[slot] = event.polarity
        self.pushed += 1
        return evicted

    def __getitem__(self, age_index: int) -> Event:
        if age_index < 0:
            age_index += self.__length
        if not 0 <= age_index < self.__length:
            raise IndexError(f"buffer index {age_index} out of range")
        slot = self._slot(age_index)
        return Event(
            t_us=int(self.__t_us[slot]),
            x=float(self.__xy[slot, 0]),
            y=float(self.__xy[slot, 1]),
            polarity=int(self.__polarity[slot]),
        )

    def __iter__(self):
        for idx in range(self.__length):
            yield self[idx]

    def central(self) -> Event:
        """The `M`-th oldest event of a full buffer"""
        MPI_RAISE_EXCEPTION(
            condition=(not self.is_full),
            exception=RuntimeError,
            message="The central event is defined only for a full buffer",
        )
        return self[self.half_size]

    def positions(self) -> np.ndarray:
        """`(len, 2)` positions of the buffered events, in storage order"""
        return self.__xy[: self.__length]

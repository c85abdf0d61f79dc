import os

from mpi4py import MPI
from mpi4py.MPI import Intracomm

import eecc


class _MPI(object):
    def __init__(
        self,
        comm: Intracomm,
        raise_exception_per_process: bool,
    ) -> None:
        self.update_communicator(comm=comm)
        self.raise_exception_per_process = raise_exception_per_process

    def update_communicator(self, comm: Intracomm) -> None:
        self.__comm = comm
        self.__size = comm.size
        self.__rank = comm.rank

    @property
    def comm(self):
        return self.__comm

    @property
    def size(self):
        return self.__size

    @property
    def rank(self):
        return self.__rank

    @property
    def nthreads_per_process(self) -> int:
        """Worker threads available to one rank, capped by `EECC_THREADS`"""
        value = os.environ.get("EECC_THREADS")
        if value is None:
            return 1
        try:
            return max(1, int(value))
        except ValueError:
            return 1

    def local_share(self, nitems: int) -> range:
        """Round-robin share of `nitems` work items owned by this rank"""
        return range(self.rank, nitems, self.size)


MPI_UTILS: _MPI = _MPI(comm=MPI.COMM_WORLD, raise_exception_per_process=True)


def Finalize() -> None:
    """A function to be called at the end of execution. Once registered with `atexit`, it will be called automatically at the end. The user doesn't need to call this function explicitly."""
    try:
        MPI.Finalize()
    except Exception as e:
        if eecc.MPI_UTILS.rank == 0:
            print(f"Caught an exception during MPI finalization: {e}")


def MPI_RAISE_EXCEPTION(
    condition: bool,
    exception: type,
    message: str,
):
    """Will raise `exception` with `message` if the `condition` is `True`.

    Parameters
    ----------
    condition : bool
        The condition to be evaluated
    exception : type
        The exception class to throw
    message : str
        The message to pass to the `Exception`

    Raises
    ------
    exception
        When `condition` holds. With `raise_exception_per_process` disabled,
        the condition is reduced over all ranks and rank 0 raises.
    """

    if eecc.MPI_UTILS.raise_exception_per_process:
        if condition:
            if eecc.MPI_UTILS.size > 1:
                message = f"Exception raised by MPI rank {eecc.MPI_UTILS.rank}\n" + message
            raise exception(message)
    else:
        exception_count = eecc.MPI_UTILS.comm.reduce(condition, MPI.SUM, 0)

        if exception_count > 0 and eecc.MPI_UTILS.rank == 0:
            error_str = f"Exception raised by {int(exception_count)} MPI process(es)\n"
            raise exception(error_str + message)

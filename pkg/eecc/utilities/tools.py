import io
import pstats
from typing import Optional, Sequence, TextIO

import numpy as np


class bash_colors:
    """
    This class contains the necessary definitions to print to bash
    screen with colors. Used for the run summaries of the command line.
    """

    HEADER = "\033[95m"
    OKBLUE = "\033[94m"
    OKGREEN = "\033[92m"
    WARNING = "\033[93m"
    FAIL = "\033[91m"
    ENDC = "\033[0m"
    BOLD = "\033[1m"
    UNDERLINE = "\033[4m"

    def header(self, string):
        return self.HEADER + str(string) + self.ENDC

    def blue(self, string):
        return self.OKBLUE + str(string) + self.ENDC

    def green(self, string):
        return self.OKGREEN + str(string) + self.ENDC

    def warning(self, string):
        return self.WARNING + str(string) + self.ENDC

    def fail(self, string):
        return self.FAIL + str(string) + self.ENDC

    def bold(self, string):
        return self.BOLD + str(string) + self.ENDC

    def underline(self, string):
        return self.UNDERLINE + str(string) + self.ENDC

    def status(self, passed: bool) -> str:
        """Green `PASS` or red `FAIL`"""
        return self.green("PASS") if passed else self.fail("FAIL")


def step_time_summary(elapsed_ns: Sequence[int]) -> Optional[tuple]:
    """Mean and median of per-event step times, in microseconds. `None`
    without any step."""
    if len(elapsed_ns) == 0:
        return None
    values = np.asarray(elapsed_ns, dtype=np.float64) * 1.0e-3
    return float(values.mean()), float(np.median(values))


def profile_run():
    """Profile the execution with module `cProfile`

    Returns
    -------
    cProfile.Profile
        A profiler; wrap the profiled code in `enable()` / `disable()`
    """
    import cProfile

    pr = cProfile.Profile()
    return pr


def output_profile(pr, stream: Optional[TextIO] = None, limit: int = 40) -> str:
    """Output of the profiling with `profile_run`, sorted by cumulative time.

    Parameters
    ----------
    pr : cProfile.Profile
        Profiler returned by `profile_run`
    stream : TextIO | None
        Where the report is printed, standard output when `None`
    limit : int
        Number of functions reported

    Returns
    -------
    str
        The report
    """
    s = io.StringIO()
    sortby = "cumulative"
    ps = pstats.Stats(pr, stream=s).sort_stats(sortby)
    ps.print_stats(limit)
    report = s.getvalue()
    print(report, file=stream)
    return report

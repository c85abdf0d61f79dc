"""
This module contains the utility functions for run summaries and profiling.

"""

from .tools import (
    bash_colors,
    step_time_summary,
    profile_run,
    output_profile,
)

__all__ = [
    # tools.py
    "bash_colors",
    "step_time_summary",
    "profile_run",
    "output_profile",
]

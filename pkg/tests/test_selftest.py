############################ TEST DESCRIPTION ############################
#
# The numerical self checks of `eecc.selftest` on reduced instance counts,
# and their `PASS`/`FAIL` report.
#
###########################################################################

import io

import pytest

import eecc
from eecc import selftest


@pytest.mark.parametrize(
    "check, kwargs",
    [
        (selftest.check_bilinear_conservation, dict(samples=5000)),
        (selftest.check_jacobian, dict(instances=20)),
        (selftest.check_closed_form_optimality, dict(instances=5, grid_points=7)),
        (selftest.check_incremental_equivalence, dict(events=300)),
        (selftest.check_trajectory_equivalence, dict(events=300)),
    ],
)
def test_check_passes(check, kwargs):
    result = check(rng_seed=3, **kwargs)
    assert result.passed, result.detail


def test_report():
    stream = io.StringIO()
    results = selftest.run_selftest(quick=True, stream=stream)
    assert len(results) == 5
    assert all(r.passed for r in results)
    lines = stream.getvalue().splitlines()
    assert len(lines) == (5 if eecc.MPI_UTILS.rank == 0 else 0)
    assert all("PASS" in line for line in lines)
    assert all(r.elapsed_s > 0 for r in results)


@pytest.mark.slow
def test_full_selftest():
    assert all(r.passed for r in selftest.run_selftest(stream=io.StringIO()))

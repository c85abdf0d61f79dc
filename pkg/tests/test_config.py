############################ TEST DESCRIPTION ############################
#
# Tests of the `key = value` configuration of `eecc.io.config`: defaults,
# aliases, type conversion and validation.
#
###########################################################################

import io

import numpy as np
import pytest

from eecc.base import ConfigError
from eecc.core import SolverMode
from eecc.io import Config, load_config, read_key_values


def test_defaults():
    config = load_config()
    assert config == Config()
    assert config.patch_radius == 15
    assert config.buffer_events == 193
    assert config.half_buffer == 96
    assert config.clamp_rad == pytest.approx(np.deg2rad(2.0))
    assert config.idle_timeout_us == 1_000_000
    assert config.solver_mode == SolverMode.INCREMENTAL


def test_values_and_comments(tmp_path):
    path = tmp_path / "eecc.cfg"
    path.write_text(
        "# tracker\n"
        "patch_radius = 10\n"
        "\n"
        "clamp_enabled = off   # raw steps\n"
        "solver_mode = Full\n"
        "outlier_px = 3.5\n"
    )
    config = load_config(path)
    assert config.patch_radius == 10
    assert config.clamp_enabled is False
    assert config.solver_mode == SolverMode.FULL
    assert config.outlier_px == 3.5
    assert config.buffer_events == 193


def test_aliases():
    config = load_config(io.StringIO("N = 7\nM = 50\n"))
    assert config.patch_radius == 7
    assert config.buffer_events == 101


@pytest.mark.parametrize(
    "text, line",
    [
        ("patch_radius = 10\nwindow = 3\n", 2),
        ("patch_radius = ten\n", 1),
        ("\n\nclamp_enabled = maybe\n", 3),
        ("solver_mode = fastest\n", 1),
        ("patch_radius\n", 1),
        ("N = 7\npatch_radius = 8\n", 2),
        ("clamp_px = 1\nclamp_px = 2\n", 2),
    ],
)
def test_rejected_lines(text, line):
    with pytest.raises(ConfigError, match=f"line {line}"):
        load_config(io.StringIO(text))


@pytest.mark.parametrize(
    "overrides",
    [
        dict(patch_radius=1),
        dict(buffer_events=192),
        dict(buffer_events=7),
        dict(outlier_px=0.0),
        dict(clamp_px=-1.0),
        dict(rho_floor=1.5),
        dict(rho_patience=0),
        dict(idle_timeout_s=0.0),
        dict(relinearize_deg=0.0),
        dict(width=20, height=20),
    ],
)
def test_validation(overrides):
    with pytest.raises(ConfigError):
        Config(**overrides)


def test_overrides_revalidate():
    config = Config().with_overrides(strict_timestamps=True)
    assert config.strict_timestamps
    with pytest.raises(ConfigError):
        Config().with_overrides(patch_radius=0)


def test_key_values_lines():
    entries = read_key_values(["a = 1\n", "# c\n", "b=two words\n"])
    assert entries == {"a": ("1", 1), "b": ("two words", 3)}

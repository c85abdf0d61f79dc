import io

import numpy as np
import pytest

import eecc


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "slow: long synthetic tracking runs, deselect with `-m 'not slow'`",
    )


def stream_lines(packet) -> list:
    """Text lines of an event packet, as the `t x y p` file would hold them"""
    sink = io.StringIO()
    eecc.io.write_events(sink, packet)
    return sink.getvalue().splitlines(keepends=True)


@pytest.fixture(scope="session")
def one_star_scene():
    return eecc.synth.SyntheticScene(star_rows=1, star_cols=1)


@pytest.fixture(scope="session")
def translating_star(one_star_scene):
    """Single star translating at 30 px/s for 0.4 s, with its seed"""
    scenario = eecc.synth.scenario_with(
        vx=30.0, vy=0.0, duration_s=0.4, scene=one_star_scene
    )
    packet, truth = eecc.synth.generate_synthetic_events(
        scenario.scene, scenario.motion, seed=3
    )
    seed = eecc.synth.scenario_seeds(scenario)[0]
    return scenario, packet, truth, seed


@pytest.fixture(scope="session")
def static_star(one_star_scene):
    """Single star at rest for 0.2 s, with its seed"""
    scenario = eecc.synth.scenario_with(duration_s=0.2, scene=one_star_scene)
    packet, truth = eecc.synth.generate_synthetic_events(
        scenario.scene, scenario.motion, seed=5
    )
    seed = eecc.synth.scenario_seeds(scenario)[0]
    return scenario, packet, truth, seed


@pytest.fixture
def rng():
    return np.random.default_rng(1234 + eecc.MPI_UTILS.rank)


@pytest.fixture(scope="session")
def event_lines():
    """Converts an event packet into text lines"""
    return stream_lines

############################ TEST DESCRIPTION ############################
#
# Tests of the synthetic star streams of `eecc.synth`.
#
# - class `TestMotionProfile`: piecewise motion, inversion and continuity.
#
# - class `TestScenarioFiles`: scenario parsing and its errors.
#
# - class `TestGenerator`: determinism, ordering, event counts and edge
# localisation of the generated stream.
#
# - class `TestGroundTruth`: exact trajectories of seeds.
#
# - class `TestBenchmark`: per-event timing of the two solver modes; the
# incremental step is bounded in absolute time and against the full one.
#
###########################################################################

import io

import numpy as np
import pytest

import eecc
from eecc.base import ConfigError
from eecc.synth import (
    MotionProfile,
    MotionSegment,
    SyntheticScene,
    generate_synthetic_events,
    load_scenario,
    parse_segments,
    scenario_seeds,
    scenario_with,
)


def distance_to_edges(points, edges):
    """Distance of every point to its nearest segment"""
    a = edges[None, :, 0, :]
    ab = edges[None, :, 1, :] - a
    ap = points[:, None, :] - a
    u = np.clip((ap * ab).sum(axis=2) / (ab * ab).sum(axis=2), 0.0, 1.0)
    closest = a + u[..., None] * ab
    return np.linalg.norm(points[:, None, :] - closest, axis=2).min(axis=1)


class TestMotionProfile:
    np.random.seed(1234 + eecc.MPI_UTILS.rank)

    profile = MotionProfile(
        segments=[
            MotionSegment(vx=10.0, vy=-5.0, omega=0.3, duration=0.5),
            MotionSegment(vx=-20.0, vy=0.0, omega=-0.1, duration=0.5, zoom=0.2),
        ],
        center=np.array([119.5, 89.5]),
    )

    def test_invert(self):
        points = np.random.uniform(0.0, 200.0, size=(50, 2))
        times = np.random.uniform(0.0, 1.2, size=50)
        images = self.profile.apply(points, times)
        np.testing.assert_allclose(self.profile.invert(images, times), points, atol=1e-9)

    def test_identity_at_start(self):
        points = np.random.uniform(0.0, 200.0, size=(10, 2))
        np.testing.assert_allclose(self.profile.apply(points, np.zeros(10)), points)

    def test_continuity(self):
        point = np.array([[60.0, 40.0]])
        before = self.profile.apply(point, 0.5 - 1e-9)
        after = self.profile.apply(point, 0.5 + 1e-9)
        np.testing.assert_allclose(before, after, atol=1e-6)

    def test_parameters(self):
        d, phi, scale = self.profile.parameters([0.25, 0.75, 1.5])
        np.testing.assert_allclose(d[0], [2.5, -1.25])
        np.testing.assert_allclose(d[1], [0.0, -2.5])
        np.testing.assert_allclose(phi, [0.075, 0.125, 0.05])
        # the last segment continues past the end
        np.testing.assert_allclose(scale, np.exp([0.0, 0.05, 0.2]))
        assert self.profile.duration == pytest.approx(1.0)

    def test_invalid(self):
        with pytest.raises(ConfigError):
            MotionProfile(segments=[])
        with pytest.raises(ConfigError):
            MotionProfile(segments=[MotionSegment(duration=0.0)])


class TestScenarioFiles:
    def test_defaults(self):
        scenario = load_scenario()
        assert scenario.duration == pytest.approx(1.0)
        (segment,) = scenario.motion.segments
        assert (segment.vx, segment.vy) == (20.0, 10.0)
        assert segment.omega == pytest.approx(np.deg2rad(10.0))
        assert len(scenario_seeds(scenario)) == 6

    def test_keys(self):
        text = (
            "star_rows = 1\n"
            "star_cols = 2\n"
            "vx = 5\n"
            "omega_deg = 0\n"
            "duration_s = 0.25\n"
            "rng_seed = 9\n"
            "gt_step_s = 0.01\n"
        )
        scenario = load_scenario(io.StringIO(text))
        assert scenario.scene.star_cols == 2
        assert scenario.rng_seed == 9
        assert scenario.gt_step_s == 0.01
        assert scenario.duration == pytest.approx(0.25)
        assert len(scenario_seeds(scenario)) == 2

    def test_segments(self):
        scenario = load_scenario(io.StringIO("segments = 10 0 0 0.2; 0 0 90 0.3 0.1\n"))
        first, second = scenario.motion.segments
        assert first.vx == 10.0
        assert second.omega == pytest.approx(np.pi / 2.0)
        assert second.zoom == 0.1
        assert scenario.duration == pytest.approx(0.5)

    @pytest.mark.parametrize(
        "text",
        [
            "duration_s = 0\n",
            "duration_s = -1\n",
            "segments = 1 0 0 0.1\nvx = 3\n",
            "segments = 1 0 0\n",
            "segments = 1 0 0 0\n",
            "brightness = 3\n",
            "star_rows = two\n",
            "star_inner_px = 15\n",
            "gt_step_s = 0\n",
        ],
    )
    def test_rejected(self, text):
        with pytest.raises(ConfigError):
            load_scenario(io.StringIO(text))

    def test_parse_segments_skips_empty(self):
        assert len(parse_segments("1 2 3 4;; 5 6 7 8;")) == 2


class TestGenerator:
    scene = SyntheticScene(star_rows=1, star_cols=1, jitter_px=0.3)

    def test_deterministic_and_sorted(self):
        scenario = scenario_with(vx=10.0, omega_deg=20.0, duration_s=0.1, scene=self.scene)
        a, _ = generate_synthetic_events(scenario.scene, scenario.motion, seed=42)
        b, _ = generate_synthetic_events(scenario.scene, scenario.motion, seed=42)
        c, _ = generate_synthetic_events(scenario.scene, scenario.motion, seed=43)
        np.testing.assert_array_equal(a.t_us, b.t_us)
        np.testing.assert_array_equal(a.positions(), b.positions())
        assert len(a) != len(c) or not np.array_equal(a.positions(), c.positions())
        assert np.all(np.diff(a.t_us) >= 0)
        assert set(np.unique(a.polarity)) <= {-1, 1}

    def test_event_count(self):
        scenario = scenario_with(duration_s=0.5, scene=self.scene)
        packet, _ = generate_synthetic_events(scenario.scene, scenario.motion, seed=1)
        expected = self.scene.edge_rate * self.scene.edge_length() * 0.5
        assert abs(len(packet) - expected) < 5.0 * np.sqrt(expected)

    def test_static_edges(self):
        scenario = scenario_with(duration_s=0.2, scene=self.scene)
        packet, _ = generate_synthetic_events(scenario.scene, scenario.motion, seed=2)
        distances = distance_to_edges(packet.positions(), self.scene.edges())
        assert np.mean(distances <= 3.0 * self.scene.jitter_px) >= 0.99

    def test_moving_edges(self):
        scenario = scenario_with(vx=40.0, vy=-20.0, omega_deg=30.0, duration_s=0.2, scene=self.scene)
        packet, _ = generate_synthetic_events(scenario.scene, scenario.motion, seed=4)
        pattern = scenario.motion.invert(packet.positions(), packet.t_us * 1.0e-6)
        distances = distance_to_edges(pattern, self.scene.edges())
        assert np.mean(distances <= 3.0 * self.scene.jitter_px + 0.01) >= 0.99

    def test_noise_inside_sensor(self):
        scene = SyntheticScene(star_rows=1, star_cols=1, edge_rate=0.0, noise_rate=2000.0)
        scenario = scenario_with(duration_s=0.5, scene=scene)
        packet, _ = generate_synthetic_events(scene, scenario.motion, seed=6)
        assert abs(len(packet) - 1000) < 5.0 * np.sqrt(1000)
        assert packet.x.min() >= 0 and packet.x.max() < scene.width
        assert packet.y.min() >= 0 and packet.y.max() < scene.height

    def test_events_iterate(self):
        scenario = scenario_with(duration_s=0.01, scene=self.scene)
        packet, _ = generate_synthetic_events(scenario.scene, scenario.motion, seed=7)
        events = list(packet)
        assert len(events) == len(packet)
        assert events[0].t_us == int(packet.t_us[0])
        assert isinstance(events[0].t_us, int)


class TestGroundTruth:
    scene = SyntheticScene(star_rows=1, star_cols=1)

    def test_static(self):
        scenario = scenario_with(duration_s=0.1, scene=self.scene)
        _, truth = generate_synthetic_events(scenario.scene, scenario.motion, seed=0)
        (seed,) = scenario_seeds(scenario)
        record = truth.record(0, seed, end_s=0.1, step_s=0.01)
        states = record.state_array()
        assert len(record) == 11
        np.testing.assert_allclose(states[:, 0], seed.x)
        np.testing.assert_allclose(states[:, 1], seed.y)
        np.testing.assert_allclose(states[:, 2], 0.0)

    def test_translation_and_rotation(self):
        scenario = scenario_with(vx=30.0, vy=-10.0, omega_deg=45.0, duration_s=1.0, scene=self.scene)
        _, truth = generate_synthetic_events(scenario.scene, scenario.motion, seed=0)
        (seed,) = scenario_seeds(scenario)
        positions, theta = truth.trajectory((seed.x, seed.y), 0.0, [0.0, 0.5, 1.0])
        np.testing.assert_allclose(theta, np.deg2rad([0.0, 22.5, 45.0]))

        expected = scenario.motion.apply(np.array([seed.x, seed.y]), 0.5)[0]
        np.testing.assert_allclose(positions[1], expected)

        # the star centre is half a pixel off the rotation centre
        rel = np.array([seed.x, seed.y]) - self.scene.center
        rotated = np.array(
            [
                np.cos(np.pi / 4) * rel[0] - np.sin(np.pi / 4) * rel[1],
                np.sin(np.pi / 4) * rel[0] + np.cos(np.pi / 4) * rel[1],
            ]
        )
        np.testing.assert_allclose(
            positions[2], self.scene.center + rotated + [30.0, -10.0], atol=1e-12
        )

    def test_late_seed(self):
        scenario = scenario_with(vx=30.0, duration_s=1.0, scene=self.scene)
        _, truth = generate_synthetic_events(scenario.scene, scenario.motion, seed=0)
        seed = eecc.io.SeedSpec(t_us=500_000, x=135.0, y=90.0)
        record = truth.record(3, seed, end_s=1.0, step_s=0.1)
        assert record.times_us[0] == 500_000
        assert record.times_us[-1] == 1_000_000
        np.testing.assert_allclose(record.state_array()[-1, :2], [150.0, 90.0])


class TestBenchmark:
    def test_rows(self):
        rows = eecc.synth.benchmark_solver_modes(events=50)
        assert [row.mode for row in rows] == ["incremental", "full"]
        assert all(row.events == 50 for row in rows)
        assert all(row.mean_us > 0 for row in rows)

    @pytest.mark.slow
    def test_incremental_speedup(self):
        rows = eecc.synth.benchmark_solver_modes(events=5000)
        incremental, full = rows
        assert incremental.events == full.events == 5000
        assert incremental.mean_us < 100.0
        assert incremental.mean_us < 0.5 * full.mean_us

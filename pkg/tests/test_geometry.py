############################ TEST DESCRIPTION ############################
#
# Tests of the events, feature states and Euclidean warps of `eecc.base`.
#
# - class `TestFeatureState`: angle wrapping and array conversion.
#
# - class `TestWarp`: `warp_to_template` / `warp_from_template` are inverse
# of each other, the seed maps onto the template origin, and
# `warp_jacobian` agrees with central finite differences.
#
# - `test_in_neighborhood`: the gate is a closed Euclidean ball.
#
###########################################################################

import numpy as np
import pytest

import eecc
from eecc.base import (
    Event,
    FeatureState,
    in_neighborhood,
    rotation_matrix,
    warp_from_template,
    warp_jacobian,
    warp_to_template,
)


class TestFeatureState:
    @pytest.mark.parametrize(
        "theta, expected",
        [
            (0.0, 0.0),
            (np.pi, np.pi),
            (-np.pi, np.pi),
            (3.0 * np.pi / 2.0, -np.pi / 2.0),
            (-5.0 * np.pi / 2.0, -np.pi / 2.0),
            (4.0 * np.pi + 0.25, 0.25),
        ],
    )
    def test_theta_is_wrapped(self, theta, expected):
        state = FeatureState(x=1.0, y=2.0, theta=theta)
        np.testing.assert_allclose(state.theta, expected, atol=1e-12)

    def test_array_roundtrip(self):
        state = FeatureState(x=10.5, y=-3.25, theta=0.4)
        np.testing.assert_allclose(state.as_array(), [10.5, -3.25, 0.4], atol=1e-15)
        again = FeatureState.from_array(state.as_array())
        np.testing.assert_allclose(again.as_array(), state.as_array(), atol=1e-15)

    def test_event_time(self):
        event = Event(t_us=1_500_000, x=3.0, y=4.0, polarity=-1)
        assert event.t == pytest.approx(1.5)
        np.testing.assert_array_equal(event.position, [3.0, 4.0])


class TestWarp:
    np.random.seed(1234 + eecc.MPI_UTILS.rank)
    states = [
        FeatureState(x=x, y=y, theta=th)
        for x, y, th in np.random.uniform(
            [20.0, 20.0, -np.pi], [200.0, 150.0, np.pi], size=(5, 3)
        )
    ]

    @pytest.mark.parametrize("state", states)
    def test_inverse(self, state):
        points = np.random.uniform(-50.0, 250.0, size=(100, 2))
        back = warp_from_template(warp_to_template(points, state), state)
        np.testing.assert_allclose(back, points, rtol=0, atol=1e-10)

    @pytest.mark.parametrize("state", states)
    def test_origin(self, state):
        np.testing.assert_allclose(
            warp_to_template(state.position, state), [0.0, 0.0], atol=1e-12
        )

    def test_rotation_direction(self):
        # a point right of the feature, seen by a feature rotated by 90 deg,
        # lies along -y in the template frame
        state = FeatureState(x=0.0, y=0.0, theta=np.pi / 2.0)
        np.testing.assert_allclose(
            warp_to_template([1.0, 0.0], state), [0.0, -1.0], atol=1e-12
        )
        np.testing.assert_allclose(
            rotation_matrix(np.pi / 2.0) @ [1.0, 0.0], [0.0, 1.0], atol=1e-12
        )

    @pytest.mark.parametrize("state", states)
    def test_jacobian_finite_differences(self, state):
        points = state.position + np.random.uniform(-15.0, 15.0, size=(50, 2))
        analytic = warp_jacobian(points, state)
        assert analytic.shape == (50, 2, 3)

        h = 1e-6
        s = state.as_array()
        for k in range(3):
            shift = np.zeros(3)
            shift[k] = h
            plus = warp_to_template(points, FeatureState.from_array(s + shift))
            minus = warp_to_template(points, FeatureState.from_array(s - shift))
            np.testing.assert_allclose(
                analytic[:, :, k], (plus - minus) / (2.0 * h), rtol=0, atol=1e-6
            )

    def test_single_point_shape(self):
        state = FeatureState(x=5.0, y=5.0, theta=0.1)
        assert warp_to_template([7.0, 8.0], state).shape == (2,)
        assert warp_jacobian([7.0, 8.0], state).shape == (2, 3)


@pytest.mark.parametrize(
    "point, inside",
    [
        ((115.0, 50.0), True),
        ((100.0, 65.0), True),
        ((110.6, 60.6), True),
        ((115.01, 50.0), False),
        ((111.0, 61.0), False),
    ],
)
def test_in_neighborhood(point, inside):
    state = FeatureState(x=100.0, y=50.0, theta=1.0)
    assert in_neighborhood(point, state, 15) is inside

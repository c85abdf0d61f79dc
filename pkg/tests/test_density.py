############################ TEST DESCRIPTION ############################
#
# Tests of the bilinear density windows of `eecc.base.density`. In the test
# suite a loop-based `DensityMap` lives in `py_DensityMap.py`.
#
# - class `TestBilinearWeights`: weights are non-negative, sum to one and
# come in the order n, n + v1, n + v2, n + v1 + v2.
#
# - class `TestDensityMap`: single and batched splats match the loop
# version, splats conserve mass inside the window, contributions outside
# the window are dropped, sampling is zero outside the support, storage may
# be a view into a larger array and the sharpness is the share of the
# window above a fraction of its peak.
#
# - class `TestPaddedFootprints`: flat footprint indices on the widened
# grid, with far points clipped into the border.
#
###########################################################################

import numpy as np
import pytest

from eecc.base import (
    DensityMap,
    ShapeError,
    bilinear_weights,
    bilinear_weights_batch,
    padded_footprints,
    sample_map,
)

import py_DensityMap as pdm


class TestBilinearWeights:
    @pytest.mark.parametrize(
        "point, base, weights",
        [
            ((0.0, 0.0), (0, 0), [1.0, 0.0, 0.0, 0.0]),
            ((0.25, 0.0), (0, 0), [0.75, 0.25, 0.0, 0.0]),
            ((0.0, 0.5), (0, 0), [0.5, 0.0, 0.5, 0.0]),
            ((-0.5, -0.5), (-1, -1), [0.25, 0.25, 0.25, 0.25]),
            ((2.75, -1.25), (2, -2), [0.0625, 0.1875, 0.1875, 0.5625]),
        ],
    )
    def test_known_values(self, point, base, weights):
        got_base, got_weights = bilinear_weights(point)
        assert got_base == base
        np.testing.assert_allclose(got_weights, weights, rtol=0, atol=1e-15)

    def test_batch_conservation(self, rng):
        points = rng.uniform(-20.0, 20.0, size=(10_000, 2))
        bases, weights = bilinear_weights_batch(points)
        assert bases.dtype == np.int64
        assert np.all(weights >= 0.0)
        np.testing.assert_allclose(weights.sum(axis=1), 1.0, rtol=0, atol=1e-12)

    def test_batch_matches_single(self, rng):
        points = rng.uniform(-5.0, 5.0, size=(50, 2))
        bases, weights = bilinear_weights_batch(points)
        for point, base, w in zip(points, bases, weights):
            single_base, single_w = bilinear_weights(point)
            assert tuple(base) == single_base
            np.testing.assert_allclose(w, single_w, rtol=0, atol=1e-15)


class TestDensityMap:
    @pytest.mark.parametrize("radius", [2, 7, 15])
    def test_splat_matches_loop(self, radius, rng):
        points = rng.uniform(-radius - 2.0, radius + 2.0, size=(200, 2))
        fast = DensityMap(radius)
        slow = pdm.DensityMap(radius)
        for point in points:
            assert fast.splat(point) == slow.splat(point)
        np.testing.assert_allclose(fast.values, slow.values, rtol=0, atol=1e-13)

    @pytest.mark.parametrize("radius", [2, 7, 15])
    def test_splat_many_matches_loop(self, radius, rng):
        points = rng.uniform(-radius - 2.0, radius + 2.0, size=(500, 2))
        fast = DensityMap(radius)
        retained = fast.splat_many(points)
        slow = pdm.DensityMap(radius)
        for point in points:
            slow.splat(point)
        np.testing.assert_allclose(fast.values, slow.values, rtol=0, atol=1e-12)
        assert retained == pytest.approx(slow.values.sum(), abs=1e-9)

    def test_interior_mass(self, rng):
        density = DensityMap(15)
        points = rng.uniform(-15.0, 13.999, size=(100_000, 2))
        retained = density.splat_many(points)
        assert retained == pytest.approx(100_000, rel=1e-12)
        assert density.mass == pytest.approx(100_000, rel=1e-12)

    def test_footprint_order_and_clipping(self):
        density = DensityMap(3)
        # base (3, -1): only the x = 3 column survives
        touched = density.splat((3.5, -0.5))
        assert touched == [(3, -1), (3, 0)]
        assert density.mass == pytest.approx(0.5)
        assert density.splat((10.0, 10.0)) == []
        assert density.mass == pytest.approx(0.5)

    def test_layout(self):
        density = DensityMap(2)
        density.splat((1.0, -2.0))
        assert density.values[0, 3] == 1.0
        assert density.vector[0 * 5 + 3] == 1.0
        assert density.contains(2, -2)
        assert not density.contains(3, 0)

    def test_sample(self, rng):
        radius = 5
        fast = DensityMap(radius)
        slow = pdm.DensityMap(radius)
        fast.values[:] = rng.uniform(0.0, 1.0, size=fast.values.shape)
        slow.values[:] = fast.values
        points = rng.uniform(-radius - 1.5, radius + 1.5, size=(300, 2))
        expected = [slow.sample(point) for point in points]
        np.testing.assert_allclose(fast.sample(points), expected, rtol=0, atol=1e-13)
        np.testing.assert_allclose(
            sample_map(fast.values, radius, points), expected, rtol=0, atol=1e-13
        )

    def test_sample_zero_outside(self):
        density = DensityMap(3)
        density.values[:] = 1.0
        np.testing.assert_array_equal(
            density.sample([[3.01, 0.0], [0.0, -3.5], [-4.0, -4.0]]), [0.0, 0.0, 0.0]
        )
        # on the border, out-of-window neighbours contribute nothing
        assert density.sample([[3.0, 0.0]])[0] == pytest.approx(1.0)

    def test_copy_is_independent(self):
        density = DensityMap(3)
        density.splat((0.0, 0.0))
        other = density.copy()
        other.splat((1.0, 1.0))
        assert density.mass == pytest.approx(1.0)
        assert other.mass == pytest.approx(2.0)

    def test_invalid_radius(self):
        with pytest.raises(ValueError):
            DensityMap(0)

    def test_storage_view(self):
        grid = np.zeros((3, 9, 9))
        density = DensityMap(3, values=grid[1, 1:-1, 1:-1])
        density.splat((0.0, 0.0))
        assert grid[1, 4, 4] == 1.0
        assert grid.sum() == 1.0
        with pytest.raises(ShapeError):
            DensityMap(3, values=np.zeros((9, 9)))

    def test_sharpness(self, rng):
        density = DensityMap(4)
        assert np.isnan(density.sharpness())
        density.splat((0.0, 0.0))
        assert density.sharpness() == pytest.approx(1.0 / 81.0)
        # a faint floor above 5% of the peak covers the whole window
        density.values += 0.1
        assert density.sharpness() == 1.0
        assert density.sharpness(threshold=0.5) == pytest.approx(1.0 / 81.0)

        crisp = DensityMap(7)
        crisp.splat_many(rng.normal(0.0, 0.7, size=(2000, 2)))
        blurred = DensityMap(7)
        blurred.splat_many(rng.uniform(-7.0, 7.0, size=(2000, 2)))
        assert crisp.sharpness() < 0.5 < blurred.sharpness()

        with pytest.raises(ValueError):
            density.sharpness(threshold=1.0)


class TestPaddedFootprints:
    def test_matches_bilinear_weights(self, rng):
        radius = 4
        points = rng.uniform(-radius, radius - 1, size=(200, 2))
        cells, weights = padded_footprints(points, radius, pad=2)
        bases, expected = bilinear_weights_batch(points)
        np.testing.assert_allclose(weights, expected, rtol=0, atol=1e-15)

        wide = 2 * (radius + 2) + 1
        iy, ix = np.divmod(cells[:, 0], wide)
        np.testing.assert_array_equal(ix - radius - 2, bases[:, 0])
        np.testing.assert_array_equal(iy - radius - 2, bases[:, 1])
        np.testing.assert_array_equal(cells[:, 3] - cells[:, 0], wide + 1)

    def test_far_points_stay_in_border(self):
        radius = 3
        wide = 2 * (radius + 2) + 1
        cells, _ = padded_footprints([[100.0, -100.0], [-50.5, 0.25]], radius, pad=2)
        assert cells.min() >= 0
        assert cells.max() < wide * wide
        iy, ix = np.divmod(cells, wide)
        outside = (ix < 2) | (ix >= wide - 2) | (iy < 2) | (iy >= wide - 2)
        assert np.all(outside[0])
        assert np.all(outside[1])

import numpy as np
import numpy.testing as npt
import pytest

from iterpool.imageops import cubic_kernel, resample, rotate, synth_base_image


class TestCubicKernel:
    def test_interpolating_property(self):
        # exactly 1 at 0, exactly 0 at the other integers
        npt.assert_allclose(cubic_kernel(np.array([0.0])), [1.0], atol=1e-15)
        npt.assert_allclose(cubic_kernel(np.array([-2.0, -1.0, 1.0, 2.0])), 0.0, atol=1e-15)

    def test_support_limited_to_two(self):
        x = np.array([2.1, -3.0, 5.0])
        npt.assert_array_equal(cubic_kernel(x), 0.0)


class TestResample:
    def test_factor_one_bitwise_identity(self):
        rng = np.random.default_rng(0)
        img = rng.uniform(0, 255, size=(32, 48)).astype(np.float32)
        out = resample(img, 1.0)
        npt.assert_array_equal(out, img)
        assert out is not img

    @pytest.mark.parametrize("factor", [0.6, 0.8, 1.2, 1.4, 2.0])
    def test_constant_image_preserved(self, factor):
        img = np.full((40, 40), 99.0, np.float32)
        out = resample(img, factor)
        npt.assert_allclose(out, 99.0, atol=1e-4)

    def test_output_dims_rounded(self):
        img = np.zeros((64, 64), np.float32)
        assert resample(img, 0.6).shape == (38, 38)
        assert resample(img, 1.4).shape == (90, 90)

    def test_upsample_impulse_matches_kernel_tensor_product(self):
        # analytic oracle: doubling maps output pixel x to source (x+0.5)/2-0.5,
        # so responses to a centered impulse are cubic-kernel products at
        # quarter-integer offsets
        size = 16
        img = np.zeros((size, size), np.float32)
        img[8, 8] = 1.0
        out = resample(img, 2.0)
        u = (np.arange(2 * size) + 0.5) / 2.0 - 0.5
        k1d = cubic_kernel(u - 8.0)
        expected = np.outer(k1d, k1d)
        interior = np.s_[4 : 2 * size - 4, 4 : 2 * size - 4]
        npt.assert_allclose(out[interior], expected[interior], atol=1e-6)

    def test_degenerate_output_rejected(self):
        with pytest.raises(ValueError):
            resample(np.zeros((10, 10), np.float32), 0.5)
        with pytest.raises(ValueError):
            resample(np.zeros((10, 10), np.float32), -1.0)


class TestRotate:
    def test_zero_angle_bitwise_identity(self):
        rng = np.random.default_rng(1)
        img = rng.uniform(0, 255, size=(20, 20)).astype(np.float32)
        npt.assert_array_equal(rotate(img, 0.0), img)

    def test_constant_image_preserved(self):
        img = np.full((24, 24), 55.0, np.float32)
        npt.assert_allclose(rotate(img, 17.0), 55.0, atol=1e-4)

    def test_round_trip_interior_error_small(self):
        # smooth image: forward+inverse rotation loses little in the interior
        y, x = np.mgrid[0:64, 0:64]
        img = (128 + 60 * np.sin(x / 9.0) * np.cos(y / 11.0)).astype(np.float32)
        back = rotate(rotate(img, 15.0), -15.0)
        interior = np.s_[16:48, 16:48]
        rms = np.sqrt(((back[interior] - img[interior]) ** 2).mean())
        assert rms <= 2.0

    def test_angle_limit(self):
        with pytest.raises(ValueError):
            rotate(np.zeros((8, 8), np.float32), 60.0)

    def test_dims_preserved(self):
        img = np.zeros((33, 33), np.float32)
        assert rotate(img, -12.5).shape == (33, 33)


class TestSynthBaseImage:
    def test_deterministic(self):
        npt.assert_array_equal(synth_base_image(64, 5), synth_base_image(64, 5))

    def test_different_seeds_differ(self):
        a = synth_base_image(64, 1)
        b = synth_base_image(64, 2)
        assert np.abs(a - b).max() > 0

    def test_textured_over_many_seeds(self):
        stds = [synth_base_image(64, s).std() for s in range(100)]
        assert min(stds) >= 5.0

    def test_range_and_dtype(self):
        img = synth_base_image(128, 3)
        assert img.dtype == np.float32
        assert img.min() >= 0.0 and img.max() <= 255.0

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            synth_base_image(32, 0)

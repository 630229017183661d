import numpy as np
import numpy.testing as npt
import pytest

from iterpool.jpegsim import BASE_QUANT_TABLE, dct8, idct8, jpeg_sim, quant_table


class TestDct8:
    def test_constant_block_is_pure_dc(self):
        block = np.full((8, 8), 3.25)
        coeff = dct8(block)
        assert coeff[0, 0] == pytest.approx(8 * 3.25, abs=1e-10)
        coeff[0, 0] = 0
        npt.assert_allclose(coeff, 0.0, atol=1e-10)

    def test_roundtrip(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            block = rng.uniform(-128, 128, size=(8, 8))
            npt.assert_allclose(idct8(dct8(block)), block, atol=1e-10)

    def test_parseval(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            block = rng.uniform(-128, 128, size=(8, 8))
            assert (block**2).sum() == pytest.approx((dct8(block) ** 2).sum(), abs=1e-8)

    def test_wrong_shape_rejected(self):
        with pytest.raises(ValueError):
            dct8(np.zeros((4, 4)))


class TestQuantTable:
    def test_qf50_is_base_table(self):
        npt.assert_array_equal(quant_table(50), BASE_QUANT_TABLE)

    def test_qf100_all_ones(self):
        npt.assert_array_equal(quant_table(100), np.ones((8, 8)))

    def test_qf90_scaling_arithmetic(self):
        # scale 20: entry 16 -> (16*20 + 50)//100 = 3
        assert quant_table(90)[0, 0] == 3

    def test_out_of_range_rejected(self):
        for qf in (0, 101, -3):
            with pytest.raises(ValueError):
                quant_table(qf)

    def test_monotone_in_quality(self):
        prev = quant_table(1)
        for qf in range(2, 101):
            cur = quant_table(qf)
            assert (cur <= prev).all()
            prev = cur


class TestJpegSim:
    def test_qf100_rms_error_below_half_gray_level(self):
        rng = np.random.default_rng(2)
        img = rng.uniform(30, 220, size=(64, 64)).astype(np.float32)
        out = jpeg_sim(img, 100)
        rms = np.sqrt(((out - img) ** 2).mean())
        assert rms <= 0.5

    def test_constant_image_stays_constant(self):
        for qf in (30, 50, 90):
            img = np.full((32, 32), 77.0, np.float32)
            out = jpeg_sim(img, qf)
            assert np.ptp(out) == pytest.approx(0.0, abs=1e-4)

    def test_second_pass_changes_less_than_first(self):
        rng = np.random.default_rng(3)
        img = rng.uniform(0, 255, size=(64, 64)).astype(np.float32)
        once = jpeg_sim(img, 70)
        twice = jpeg_sim(once, 70)
        first_change = np.abs(once - img).mean()
        second_change = np.abs(twice - once).mean()
        assert second_change < first_change

    def test_non_multiple_of_eight_dims_padded(self):
        rng = np.random.default_rng(4)
        img = rng.uniform(0, 255, size=(37, 50)).astype(np.float32)
        out = jpeg_sim(img, 80)
        assert out.shape == (37, 50)

    def test_empty_or_wrong_ndim_rejected(self):
        with pytest.raises(ValueError):
            jpeg_sim(np.zeros((0, 8)), 80)
        with pytest.raises(ValueError):
            jpeg_sim(np.zeros((8, 8, 3)), 80)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        img = rng.uniform(0, 255, size=(40, 40)).astype(np.float32)
        npt.assert_array_equal(jpeg_sim(img, 60), jpeg_sim(img.copy(), 60))

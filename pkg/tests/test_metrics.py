import math

import numpy as np
import pytest

from graysr.image import Image, Range
from graysr.metrics import MetricReport, RatingSet, compare, mos, mse, psnr, ssim


def img(arr, rng=Range.BYTE255):
    return Image(np.asarray(arr, dtype=np.float64), rng)


def rand_img(seed, shape=(16, 16)):
    return img(np.random.default_rng(seed).uniform(0, 255, shape))


class TestMSE:
    def test_identity(self):
        x = rand_img(0)
        assert mse(x, x) == 0.0

    def test_constant_images(self):
        a = img(np.full((5, 5), 10.0))
        b = img(np.full((5, 5), 12.0))
        assert mse(a, b) == 4.0

    def test_full_swing(self):
        # oracle: ((0-255)^2 + (255-0)^2) / 2 = 65025
        a = img([[0.0, 255.0]])
        b = img([[255.0, 0.0]])
        assert mse(a, b) == 65025.0

    def test_offset_law_exact(self):
        rng = np.random.default_rng(1)
        base = rng.uniform(0, 200, (12, 9))
        for c in (1.0, 7.0, 55.0):
            assert mse(img(base), img(base + c)) == pytest.approx(c * c, rel=0, abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mse(img(np.zeros((4, 4))), img(np.zeros((4, 5))))


class TestPSNR:
    def test_full_swing_zero_db(self):
        a = img([[0.0, 255.0]])
        b = img([[255.0, 0.0]])
        assert psnr(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_unit_difference(self):
        # oracle: 10*log10(65025) = 48.13080278...
        rng = np.random.default_rng(2)
        base = rng.uniform(0, 254, (8, 8))
        assert psnr(img(base), img(base + 1.0)) == pytest.approx(48.1308, abs=1e-3)

    def test_infinite_sentinel(self):
        x = rand_img(3)
        assert psnr(x, x) == math.inf

    def test_monotone_in_noise(self):
        rng = np.random.default_rng(4)
        base = rng.uniform(30, 220, (32, 32))
        values = []
        for sigma in (1.0, 2.0, 4.0, 8.0, 16.0):
            noisy = np.clip(base + rng.normal(0, sigma, base.shape), 0, 255)
            values.append(psnr(img(base), img(noisy)))
        assert all(a > b for a, b in zip(values, values[1:]))


class TestSSIM:
    def test_self_similarity(self):
        x = rand_img(5, (20, 20))
        assert ssim(x, x) == pytest.approx(1.0, abs=1e-9)

    def test_constant_self(self):
        x = img(np.full((16, 16), 99.0))
        assert ssim(x, x) == pytest.approx(1.0, abs=1e-9)

    def test_symmetry(self):
        for seed in range(5):
            a, b = rand_img(seed, (14, 18)), rand_img(seed + 100, (14, 18))
            assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_bounds(self):
        for seed in range(8):
            a, b = rand_img(seed, (13, 13)), rand_img(seed + 50, (13, 13))
            assert -1.0 <= ssim(a, b) <= 1.0

    def test_degrades_with_blur(self):
        rng = np.random.default_rng(9)
        base = rng.uniform(0, 255, (32, 32))
        blurred = base.copy()
        for _ in range(4):
            blurred = (
                blurred
                + np.roll(blurred, 1, 0)
                + np.roll(blurred, -1, 0)
                + np.roll(blurred, 1, 1)
                + np.roll(blurred, -1, 1)
            ) / 5.0
        assert ssim(img(base), img(blurred)) < ssim(img(base), img(base))

    def test_too_small(self):
        with pytest.raises(ValueError):
            ssim(img(np.zeros((10, 10))), img(np.zeros((10, 10))))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            ssim(img(np.zeros((12, 12))), img(np.zeros((12, 13))))


class TestMOS:
    def test_mean(self):
        assert mos(RatingSet((2, 3, 4))) == 3.0

    def test_all_fives(self):
        assert mos(RatingSet((5, 5, 5, 5, 5))) == 5.0

    def test_single_rater(self):
        assert mos(RatingSet((1,))) == 1.0

    def test_accepts_plain_sequence(self):
        assert mos([4, 5, 5, 5, 5]) == pytest.approx(4.8)

    def test_output_in_range(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            scores = tuple(int(s) for s in rng.integers(1, 6, size=rng.integers(1, 12)))
            assert 1.0 <= mos(RatingSet(scores)) <= 5.0

    def test_invalid_scores(self):
        with pytest.raises(ValueError):
            RatingSet(())
        with pytest.raises(ValueError):
            RatingSet((0, 3))
        with pytest.raises(ValueError):
            RatingSet((6,))


def test_compare_report():
    a, b = rand_img(20, (16, 16)), rand_img(21, (16, 16))
    rep = compare(a, b)
    assert isinstance(rep, MetricReport)
    assert rep.mse == mse(a, b)
    assert rep.psnr_db == psnr(a, b)
    assert rep.ssim == ssim(a, b)

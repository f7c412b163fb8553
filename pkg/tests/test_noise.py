import math

import numpy as np
import numpy.testing as npt
import pytest

from conftest import tiny_model_config
from wavesf.data import load_split_raw
from wavesf.model import build_model
from wavesf.noise import (
    add_speckle,
    calibrate_speckle,
    corrupt_images,
    mean_psnr_at,
    noise_bench,
    noise_csv_text,
    psnr,
)


class TestAddSpeckle:
    def test_zero_variance_identity(self, rng):
        g = rng.random((8, 8))
        npt.assert_array_equal(add_speckle(g, 0.0, rng), g)

    def test_zero_image_stays_zero(self, rng):
        g = np.zeros((8, 8))
        npt.assert_array_equal(add_speckle(g, 0.5, rng, max_val=1.0), g)

    def test_negative_variance_rejected(self, rng):
        with pytest.raises(ValueError, match=">= 0"):
            add_speckle(np.ones((2, 2)), -1e-3, rng)

    def test_noise_field_mean_law_of_large_numbers(self):
        s = 0.04
        rng = np.random.default_rng(7)
        g = np.full(1_000_000, 0.5)
        noisy = add_speckle(g, s, rng, max_val=10.0)  # high max: no clamping
        u = noisy / g - 1.0
        assert abs(u.mean()) < 3 * math.sqrt(s / 1e6)
        assert u.var() == pytest.approx(s, rel=0.01)

    def test_clamped_to_range(self):
        rng = np.random.default_rng(0)
        g = np.full((64, 64), 0.9)
        noisy = add_speckle(g, 0.5, rng, max_val=1.0)
        assert noisy.max() <= 1.0 and noisy.min() >= 0.0

    def test_seeded_determinism(self):
        g = np.random.default_rng(1).random((16, 16))
        a = add_speckle(g, 0.1, np.random.default_rng(5))
        b = add_speckle(g, 0.1, np.random.default_rng(5))
        npt.assert_array_equal(a, b)


class TestPsnr:
    def test_forty_db(self):
        clean = np.zeros(100)
        noisy = np.full(100, 1e-2)  # MSE 1e-4, max 1.0
        assert psnr(clean, noisy, 1.0) == pytest.approx(40.0, abs=1e-9)

    def test_zero_db_at_unit_ratio(self):
        clean = np.zeros(10)
        noisy = np.full(10, 255.0)
        assert psnr(clean, noisy, 255.0) == pytest.approx(0.0, abs=1e-9)

    def test_identical_images_rejected(self):
        img = np.ones(5)
        with pytest.raises(ValueError, match="identical images"):
            psnr(img, img.copy(), 1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            psnr(np.ones(3), np.ones(4), 1.0)


@pytest.fixture(scope="module")
def test_images(dataset):
    images, labels = load_split_raw(dataset, "test", 32)
    return images, labels


class TestCalibration:
    def test_hits_target_within_tolerance(self, test_images):
        images, _ = test_images
        params = calibrate_speckle(images, 19.28, tol_db=0.1, seed=3)
        assert abs(params.achieved_psnr - 19.28) <= 0.1
        assert params.s > 0

    def test_infinite_target_rejected(self, test_images):
        with pytest.raises(ValueError, match="finite"):
            calibrate_speckle(test_images[0], math.inf, seed=0)

    def test_monotone_psnr_in_variance(self, test_images):
        images, _ = test_images
        from wavesf.noise import _noise_fields

        fields = _noise_fields(np.asarray(images, dtype=np.float64), 11)
        values = [mean_psnr_at(images, fields, s, 1.0) for s in (1e-4, 1e-3, 1e-2, 1e-1)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_corruption_reproduces_calibrated_psnr(self, test_images):
        images, _ = test_images
        params = calibrate_speckle(images, 23.13, tol_db=0.1, seed=9)
        noisy = corrupt_images(images, params)
        achieved = float(np.mean([psnr(g, f, 1.0) for g, f in zip(
            np.asarray(images, dtype=np.float64), noisy)]))
        assert achieved == pytest.approx(params.achieved_psnr, abs=1e-9)

    def test_determinism_per_seed(self, test_images):
        images, _ = test_images
        a = calibrate_speckle(images, 21.46, seed=4)
        b = calibrate_speckle(images, 21.46, seed=4)
        assert a.s == b.s and a.achieved_psnr == b.achieved_psnr


@pytest.fixture(scope="module")
def bench_model():
    return build_model(tiny_model_config(), 17)


class TestNoiseBench:

    def test_clean_row_first_and_csv_schema(self, bench_model, test_images):
        images, labels = test_images
        rows = noise_bench(bench_model, images, labels, ladder=(30.0,), seed=5)
        assert len(rows) == 2
        assert math.isinf(rows[0]["level_db_target"])
        assert rows[0]["s"] == 0.0
        text = noise_csv_text(rows)
        assert text.splitlines()[0] == "level_db_target,level_db_achieved,s,accuracy,macro_f1"
        assert len(text.splitlines()) == 3

    def test_near_clean_level_matches_clean_accuracy(self, bench_model, test_images):
        images, labels = test_images
        rows = noise_bench(bench_model, images, labels, ladder=(60.0,), seed=6)
        assert abs(rows[1]["accuracy"] - rows[0]["accuracy"]) <= 0.01 + 1e-9

    def test_identical_seeds_identical_results(self, bench_model, test_images):
        images, labels = test_images
        a = noise_bench(bench_model, images, labels, ladder=(25.0,), seed=8)
        b = noise_bench(bench_model, images, labels, ladder=(25.0,), seed=8)
        assert a == b

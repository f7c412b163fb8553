import numpy as np
import numpy.testing as npt
import pytest

from wavesf.data import (
    bilinear_resize,
    load_manifest,
    load_split,
    load_split_raw,
    normalize_stack,
    standardize,
)
from wavesf.pgm import ImageGray, PgmError, read_pgm, write_pgm


class TestPgm:
    def test_round_trip_all_256_intensities(self, tmp_path):
        pixels = np.arange(256, dtype=np.uint8).reshape(16, 16)
        path = tmp_path / "gray.pgm"
        write_pgm(ImageGray(16, 16, pixels), path)
        back = read_pgm(path)
        assert (back.width, back.height) == (16, 16)
        npt.assert_array_equal(back.pixels, pixels)

    def test_header_example(self, tmp_path):
        path = tmp_path / "tiny.pgm"
        path.write_bytes(b"P5 2 2 255\n" + bytes([0, 64, 128, 255]))
        img = read_pgm(path)
        npt.assert_array_equal(img.pixels, [[0, 64], [128, 255]])

    def test_comments_tolerated_on_read_never_written(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# a comment\n2 # inline\n2\n255\n" + bytes(4))
        assert read_pgm(path).width == 2
        out = tmp_path / "out.pgm"
        write_pgm(ImageGray(2, 2, np.zeros((2, 2), np.uint8)), out)
        assert b"#" not in out.read_bytes()

    def test_ascii_variant_rejected(self, tmp_path):
        path = tmp_path / "a.pgm"
        path.write_bytes(b"P2\n2 2\n255\n0 0 0 0\n")
        with pytest.raises(PgmError, match="unsupported variant"):
            read_pgm(path)

    def test_bad_magic_offset(self, tmp_path):
        path = tmp_path / "b.pgm"
        path.write_bytes(b"JUNK\n")
        with pytest.raises(PgmError, match="at offset 0"):
            read_pgm(path)

    def test_maxval_above_255_rejected(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
        with pytest.raises(PgmError, match="maxval 65535"):
            read_pgm(path)

    def test_truncated_payload_reports_offset(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(7))
        with pytest.raises(PgmError, match="truncated payload at offset 11"):
            read_pgm(path)


class TestStandardize:
    def test_constant_image_maps_to_zeros(self):
        img = ImageGray(8, 8, np.full((8, 8), 130, np.uint8))
        out = standardize(img, 8)
        npt.assert_array_equal(out, np.zeros((1, 8, 8), np.float32))

    def test_output_statistics(self, rng):
        img = ImageGray(16, 16, rng.integers(0, 256, (16, 16)).astype(np.uint8))
        out = standardize(img, 16)
        assert abs(out.mean()) < 1e-6
        assert out.std() == pytest.approx(1.0, abs=1e-5)

    def test_same_size_resize_is_exact(self, rng):
        arr = rng.random((12, 12)).astype(np.float32)
        npt.assert_array_equal(bilinear_resize(arr, 12, 12), arr)

    def test_downscale_preserves_mean_roughly(self, rng):
        arr = rng.random((32, 32)).astype(np.float32)
        small = bilinear_resize(arr, 16, 16)
        assert small.shape == (16, 16)
        assert abs(small.mean() - arr.mean()) < 0.05

    def test_normalize_stack_per_image(self, rng):
        raw = rng.random((3, 1, 8, 8)).astype(np.float32)
        out = normalize_stack(raw)
        npt.assert_allclose(out.mean(axis=(1, 2, 3)), 0, atol=1e-6)
        npt.assert_allclose(out.std(axis=(1, 2, 3)), 1, atol=1e-4)


class TestManifestAndSplits:
    def test_partition_exact(self, dataset):
        splits = {s: dataset.split_entries(s) for s in ("train", "val", "test")}
        total = sum(len(v) for v in splits.values())
        assert total == len(dataset.entries) == 128
        paths = [e.path for v in splits.values() for e in v]
        assert len(set(paths)) == total

    def test_fifteen_percent_test_rule(self, dataset):
        # 16 per class: 11 train / 2 val / 3 test per class
        assert len(dataset.split_entries("test")) == 24
        assert len(dataset.split_entries("val")) == 16
        assert len(dataset.split_entries("train")) == 88

    def test_load_split_labels_and_determinism(self, dataset):
        x, y = load_split(dataset, "test", 32)
        assert x.shape == (24, 1, 32, 32)
        assert y.min() >= 0 and y.max() < 8
        x2, y2 = load_split(dataset, "test", 32)
        npt.assert_array_equal(x, x2)
        npt.assert_array_equal(y, y2)

    def test_manifest_round_trip(self, dataset, tmp_path):
        import os

        loaded = load_manifest(os.path.join(dataset.root, "manifest.tsv"))
        assert loaded.class_names == dataset.class_names
        assert [e.path for e in loaded.entries] == [e.path for e in dataset.entries]

    def test_missing_file_reported(self, dataset, tmp_path):
        manifest_text = open(f"{dataset.root}/manifest.tsv").read()
        bad = tmp_path / "manifest.tsv"
        bad.write_text(manifest_text.replace("amd_0000", "missing_9999", 1))
        with pytest.raises(FileNotFoundError, match="missing_9999"):
            load_manifest(bad)

    def test_empty_split_rejected(self, dataset):
        with pytest.raises(ValueError, match="unknown split|split"):
            dataset.split_entries("holdout")

    def test_load_raw_in_unit_range(self, dataset):
        x, _ = load_split_raw(dataset, "val", 64)
        assert x.min() >= 0.0 and x.max() <= 1.0

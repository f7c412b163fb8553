import numpy as np
import numpy.testing as npt
import pytest

import wavesf.functional as F
from conftest import tiny_model_config
from wavesf.augment import AugmentConfig, augment, rotate_bilinear
from wavesf.data import load_split_raw, normalize_stack
from wavesf.model import build_model
from wavesf.optim import Adam
from wavesf.tensor import Tensor
from wavesf.train import SplitData, TrainConfig, evaluate, history_csv_text, train

IDENTITY = AugmentConfig(rotation_deg=0.0, crop_scale=(1.0, 1.0), jitter=0.0, hflip_prob=0.0)


class TestAugment:
    def test_disabled_config_is_identity(self, rng):
        img = rng.random((1, 16, 16)).astype(np.float32)
        out = augment(img, IDENTITY, np.random.default_rng(0))
        npt.assert_array_equal(out, img)

    def test_forced_flip_twice_restores(self, rng):
        cfg = AugmentConfig(rotation_deg=0.0, crop_scale=(1.0, 1.0), jitter=0.0, hflip_prob=1.0)
        img = rng.random((1, 16, 16)).astype(np.float32)
        once = augment(img, cfg, np.random.default_rng(0))
        twice = augment(once, cfg, np.random.default_rng(1))
        npt.assert_array_equal(twice, img)

    def test_seeded_determinism_byte_identical(self, rng):
        img = rng.random((1, 32, 32)).astype(np.float32)
        cfg = AugmentConfig()
        a = augment(img, cfg, np.random.default_rng(42))
        b = augment(img, cfg, np.random.default_rng(42))
        assert a.tobytes() == b.tobytes()

    def test_shape_and_range_preserved(self, rng):
        cfg = AugmentConfig()
        for seed in range(10):
            img = rng.random((1, 24, 24)).astype(np.float32)
            out = augment(img, cfg, np.random.default_rng(seed))
            assert out.shape == (1, 24, 24)
            assert out.min() >= 0.0 and out.max() <= 1.0

    def test_tensor_in_tensor_out(self, rng):
        out = augment(Tensor(rng.random((1, 8, 8)).astype(np.float32)), IDENTITY,
                      np.random.default_rng(0))
        assert isinstance(out, Tensor)

    def test_rotation_zero_fills_corners(self):
        img = np.ones((32, 32), dtype=np.float32)
        out = rotate_bilinear(img, 15.0)
        assert out[0, 0] == 0.0 and out[-1, -1] == 0.0
        assert out[16, 16] == pytest.approx(1.0, abs=1e-6)

    def test_zoom_out_pads_with_zeros(self, rng):
        cfg = AugmentConfig(rotation_deg=0.0, crop_scale=(1.44, 1.44), jitter=0.0, hflip_prob=0.0)
        img = np.ones((1, 20, 20), dtype=np.float32)
        out = augment(img, cfg, np.random.default_rng(3))
        assert out.min() == 0.0  # border came from outside the source
        assert out.max() <= 1.0

    def test_crop_scale_validation(self):
        with pytest.raises(ValueError, match="crop_scale"):
            AugmentConfig(crop_scale=(1.2, 0.8)).validate()


class TestTrainLoop:
    def small_data(self, dataset, n_train=8, n_val=4):
        x, y = load_split_raw(dataset, "train", 32)
        return SplitData(x[:n_train], y[:n_train], x[n_train : n_train + n_val],
                         y[n_train : n_train + n_val])

    def test_step_count_arithmetic(self, dataset):
        data = self.small_data(dataset, n_train=4, n_val=2)
        cfg = TrainConfig(epochs=1, batch_size=2, seed=3)
        result = train(tiny_model_config(), data, cfg, IDENTITY)
        assert result.steps == 2
        assert len(result.history) == 1

    def test_fixed_batch_loss_decreases_after_50_steps(self, dataset):
        x, y = load_split_raw(dataset, "train", 32)
        batch = Tensor(normalize_stack(x[:8]))
        labels = y[:8]
        model = build_model(tiny_model_config(), 11)
        opt = Adam(list(model.named_parameters()))
        first = None
        for _ in range(50):
            loss = F.cross_entropy_loss(model.forward(batch, "train"), labels)
            if first is None:
                first = loss.item()
            opt.zero_grad()
            loss.backward()
            opt.step(2e-4)
        final = F.cross_entropy_loss(model.forward(batch, "eval"), labels).item()
        assert final < first

    def test_identical_seeds_identical_history(self, dataset, tmp_path):
        data = self.small_data(dataset)
        cfg = TrainConfig(epochs=2, batch_size=4, seed=21)
        r1 = train(tiny_model_config(), data, cfg, out_dir=str(tmp_path / "a"))
        r2 = train(tiny_model_config(), data, cfg, out_dir=str(tmp_path / "b"))
        assert (tmp_path / "a/history.csv").read_bytes() == (tmp_path / "b/history.csv").read_bytes()
        assert (tmp_path / "a/best.ckpt").read_bytes() == (tmp_path / "b/best.ckpt").read_bytes()

    def test_history_csv_columns(self, dataset):
        data = self.small_data(dataset)
        result = train(tiny_model_config(), data, TrainConfig(epochs=1, batch_size=4, seed=5),
                       IDENTITY)
        text = history_csv_text(result.history)
        header, row = text.strip().split("\n")
        assert header == "epoch,lr,train_loss,train_acc,val_loss,val_acc"
        assert len(row.split(",")) == 6

    def test_empty_split_rejected(self, dataset):
        x, y = load_split_raw(dataset, "train", 32)
        data = SplitData(x[:0], y[:0], x[:2], y[:2])
        with pytest.raises(ValueError, match="nonempty"):
            train(tiny_model_config(), data, TrainConfig(epochs=1, seed=0))

    def test_best_checkpoint_tracks_val_accuracy(self, dataset):
        data = self.small_data(dataset)
        result = train(tiny_model_config(), data, TrainConfig(epochs=3, batch_size=4, seed=9),
                       IDENTITY)
        accs = [row["val_acc"] for row in result.history]
        assert result.best_val_acc == max(accs)
        # ties on accuracy resolve to the lowest validation loss
        candidates = [i for i, a in enumerate(accs) if a == max(accs)]
        losses = [result.history[i]["val_loss"] for i in candidates]
        assert result.best_epoch == candidates[int(np.argmin(losses))]

    def test_evaluate_returns_loss_acc_preds(self, dataset):
        x, y = load_split_raw(dataset, "val", 32)
        model = build_model(tiny_model_config(), 2)
        loss, acc, preds = evaluate(model, normalize_stack(x), y)
        assert preds.shape == y.shape
        assert 0.0 <= acc <= 1.0
        assert loss > 0


class TestBatchNormRefresh:
    def test_single_batch_refresh_sets_exact_batch_stats(self, rng):
        from wavesf.tensor import Tensor, no_grad
        from wavesf.train import refresh_batchnorm_stats

        model = build_model(tiny_model_config(), 13)
        images = normalize_stack(rng.random((8, 1, 32, 32)).astype(np.float32))
        # pollute the stats with a very different distribution
        with no_grad():
            model.forward(Tensor(10.0 * rng.standard_normal((8, 1, 32, 32)).astype(np.float32)),
                          "train")
        refresh_batchnorm_stats(model, images, batch_size=8)
        # one refresh batch at momentum 1 leaves exactly that batch's stats
        first_bn = model.stages[0].blocks[0].bn1
        with no_grad():
            conv_out = model.stages[0].blocks[0].conv1.forward(
                Tensor(model_input_ll(model, images)))
        npt.assert_allclose(first_bn._buffers["running_mean"],
                            conv_out.data.mean(axis=(0, 2, 3)), rtol=1e-5, atol=1e-6)
        npt.assert_allclose(first_bn._buffers["running_var"],
                            conv_out.data.var(axis=(0, 2, 3)), rtol=1e-4, atol=1e-6)

    def test_refresh_restores_momentum(self, rng):
        from wavesf.train import _batch_norms, refresh_batchnorm_stats

        model = build_model(tiny_model_config(), 14)
        images = normalize_stack(rng.random((6, 1, 32, 32)).astype(np.float32))
        refresh_batchnorm_stats(model, images, batch_size=4)
        assert all(bn.momentum == 0.1 for bn in _batch_norms(model))


def model_input_ll(model, images):
    """The low-branch input the first stage sees (approximation band)."""
    from wavesf.tensor import Tensor, no_grad
    from wavesf.wavelet import haar_dwt2d

    with no_grad():
        return haar_dwt2d(Tensor(images)).ll.data

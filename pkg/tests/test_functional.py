import numpy as np
import numpy.testing as npt
import pytest

import wavesf.functional as F
from wavesf.tensor import Tensor


def conv2d_reference(x, w, b, stride, pad):
    """Direct six-loop convolution oracle (zero padding, cross-correlation)."""
    n, c, h, wd = x.shape
    o, i, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((n, o, oh, ow), dtype=np.float64)
    for ni in range(n):
        for oi in range(o):
            for y in range(oh):
                for xx in range(ow):
                    acc = 0.0
                    for ci in range(i):
                        for ky in range(kh):
                            for kx in range(kw):
                                acc += xp[ni, ci, y * stride + ky, xx * stride + kx] * w[oi, ci, ky, kx]
                    out[ni, oi, y, xx] = acc + (b[oi] if b is not None else 0.0)
    return out


class TestConv2d:
    def test_ones_input_summing_kernel(self):
        x = Tensor(np.ones((1, 1, 3, 3), dtype=np.float32))
        w = Tensor(np.ones((1, 1, 2, 2), dtype=np.float32))
        out = F.conv2d(x, w)
        npt.assert_array_equal(out.data, np.full((1, 1, 2, 2), 4.0))

    def test_dirac_kernel_is_identity(self, rng):
        x = Tensor(rng.standard_normal((2, 3, 6, 6)).astype(np.float32))
        w = np.zeros((3, 3, 3, 3), dtype=np.float32)
        for c in range(3):
            w[c, c, 1, 1] = 1.0
        out = F.conv2d(x, Tensor(w), stride=1, padding=1)
        npt.assert_array_equal(out.data, x.data)

    def test_matches_six_loop_reference(self, rng):
        x = rng.standard_normal((1, 2, 5, 5))
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        out = F.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=2, padding=1)
        assert out.data.shape == (1, 3, 3, 3)
        npt.assert_allclose(out.data, conv2d_reference(x, w, b, 2, 1), atol=1e-6)

    def test_grouped_matches_reference_per_group(self, rng):
        x = rng.standard_normal((2, 4, 6, 6))
        w = rng.standard_normal((4, 2, 3, 3))
        out = F.conv2d(Tensor(x), Tensor(w), stride=1, padding=1, groups=2)
        for g in range(2):
            ref = conv2d_reference(x[:, 2 * g : 2 * g + 2], w[2 * g : 2 * g + 2], None, 1, 1)
            npt.assert_allclose(out.data[:, 2 * g : 2 * g + 2], ref, atol=1e-6)

    def test_groups_must_divide_channels(self):
        x = Tensor(np.zeros((1, 3, 4, 4)))
        w = Tensor(np.zeros((3, 1, 3, 3)))
        with pytest.raises(ValueError, match="groups do not divide 3"):
            F.conv2d(x, w, groups=2)

    def test_channel_mismatch_names_dimension(self):
        x = Tensor(np.zeros((1, 3, 4, 4)))
        w = Tensor(np.zeros((2, 4, 3, 3)))
        with pytest.raises(ValueError, match="input channels"):
            F.conv2d(x, w)

    def test_kernel_larger_than_padded_input(self):
        with pytest.raises(ValueError, match="exceeds padded input"):
            F.conv2d(Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros((1, 1, 5, 5))))

    def test_reflect_padding_forward(self, rng):
        x = rng.standard_normal((1, 1, 4, 4))
        w = rng.standard_normal((1, 1, 3, 3))
        out = F.conv2d(Tensor(x), Tensor(w), padding=1, pad_mode="reflect")
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)), mode="reflect")
        ref = conv2d_reference(xp, w, None, 1, 0)
        npt.assert_allclose(out.data, ref, atol=1e-6)


class TestBatchNorm:
    def test_symmetric_two_sample_batch(self):
        x = Tensor(np.array([1.0, 3.0]).reshape(2, 1, 1, 1))
        out = F.batch_norm2d(x, Tensor([1.0]), Tensor([0.0]), np.zeros(1), np.ones(1),
                             "train", eps=0.0)
        npt.assert_allclose(out.data.reshape(-1), [-1.0, 1.0])

    def test_affine_follow_through(self):
        x = Tensor(np.array([1.0, 3.0]).reshape(2, 1, 1, 1))
        out = F.batch_norm2d(x, Tensor([2.0]), Tensor([5.0]), np.zeros(1), np.ones(1),
                             "train", eps=0.0)
        npt.assert_allclose(out.data.reshape(-1), [3.0, 7.0])

    def test_train_output_statistics(self, rng):
        x = Tensor(rng.standard_normal((4, 3, 2, 2)) * 3 + 1)
        eps = 1e-5
        out = F.batch_norm2d(x, Tensor(np.ones(3)), Tensor(np.zeros(3)),
                             np.zeros(3), np.ones(3), "train", eps=eps)
        mean = out.data.mean(axis=(0, 2, 3))
        var = out.data.var(axis=(0, 2, 3))
        npt.assert_allclose(mean, 0, atol=1e-5)
        sigma2 = x.data.var(axis=(0, 2, 3))
        npt.assert_allclose(var, sigma2 / (sigma2 + eps), atol=1e-4)

    def test_running_stats_update_and_eval(self, rng):
        x = rng.standard_normal((4, 2, 3, 3))
        mean, var = np.zeros(2), np.ones(2)
        F.batch_norm2d(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)),
                       mean, var, "train", momentum=0.1)
        npt.assert_allclose(mean, 0.1 * x.mean(axis=(0, 2, 3)), atol=1e-7)
        npt.assert_allclose(var, 0.9 + 0.1 * x.var(axis=(0, 2, 3)), atol=1e-7)
        out = F.batch_norm2d(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)),
                             mean, var, "eval")
        ref = (x - mean.reshape(1, 2, 1, 1)) / np.sqrt(var.reshape(1, 2, 1, 1) + 1e-5)
        npt.assert_allclose(out.data, ref, rtol=1e-6)

    def test_degenerate_batch_rejected(self):
        x = Tensor(np.zeros((1, 2, 1, 1)))
        with pytest.raises(ValueError, match="N\\*H\\*W >= 2"):
            F.batch_norm2d(x, Tensor(np.ones(2)), Tensor(np.zeros(2)),
                           np.zeros(2), np.ones(2), "train")


class TestPooling:
    def test_max_window2(self):
        x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2))
        assert F.pool2d(x, "max", 2).item() == 4.0

    def test_avg_window2(self):
        x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2))
        assert F.pool2d(x, "avg", 2).item() == 2.5

    def test_ramp_max_pool(self):
        x = Tensor(np.arange(16, dtype=np.float32).reshape(1, 1, 4, 4))
        out = F.pool2d(x, "max", 2, 2)
        npt.assert_array_equal(out.data.reshape(2, 2), [[5, 7], [13, 15]])

    def test_window_too_large(self):
        with pytest.raises(ValueError, match="window 3 larger"):
            F.pool2d(Tensor(np.zeros((1, 1, 2, 2))), "max", 3)

    def test_max_tie_routes_to_first_rowmajor(self):
        x = Tensor(np.zeros((1, 1, 2, 2)), requires_grad=True, dtype=np.float64)
        F.pool2d(x, "max", 2).backward()
        npt.assert_array_equal(x.grad.reshape(2, 2), [[1, 0], [0, 0]])

    def test_overlapping_max_grad_accumulates(self):
        x = Tensor(np.arange(9, dtype=np.float64).reshape(1, 1, 3, 3), requires_grad=True)
        F.pool2d(x, "max", 2, 1).sum().backward()
        npt.assert_array_equal(x.grad.reshape(3, 3), [[0, 0, 0], [0, 1, 1], [0, 1, 1]])

    def test_avg_pool_strided(self, rng):
        x = rng.standard_normal((2, 3, 6, 6))
        out = F.pool2d(Tensor(x), "avg", 3, 2)
        manual = np.empty((2, 3, 2, 2))
        for n in range(2):
            for c in range(3):
                for i in range(2):
                    for j in range(2):
                        manual[n, c, i, j] = x[n, c, 2 * i : 2 * i + 3, 2 * j : 2 * j + 3].mean()
        npt.assert_allclose(out.data, manual, atol=1e-6)


class TestGlobalAvgPool:
    def test_constant_map(self):
        assert F.global_avg_pool(Tensor(np.full((1, 1, 4, 4), 7.0))).item() == 7.0

    def test_small_example(self):
        x = Tensor(np.array([[1.0, 3.0], [5.0, 7.0]]).reshape(1, 1, 2, 2))
        assert F.global_avg_pool(x).item() == 4.0

    def test_matches_sum_over_count(self, rng):
        x = rng.standard_normal((2, 3, 5, 5))
        out = F.global_avg_pool(Tensor(x))
        npt.assert_allclose(out.data[..., 0, 0], x.sum(axis=(2, 3)) / 25, atol=1e-6)


class TestActivations:
    def test_relu_values(self):
        out = F.relu(Tensor([-2.0, 3.0]))
        npt.assert_array_equal(out.data, [0.0, 3.0])

    def test_leaky_relu_definition(self):
        out = F.leaky_relu(Tensor([-2.0]), alpha=0.01)
        npt.assert_allclose(out.data, [-0.02])

    def test_sigmoid_at_zero(self):
        assert F.sigmoid(Tensor([0.0])).data[0] == 0.5

    def test_activate_dispatch(self):
        x = Tensor([-1.0, 1.0])
        npt.assert_array_equal(F.activate(x, "relu").data, F.relu(x).data)
        with pytest.raises(ValueError, match="unknown activation"):
            F.activate(x, "gelu")


class TestSoftmax:
    def test_uniform(self):
        npt.assert_allclose(F.softmax(Tensor([0.0, 0.0]), 0).data, [0.5, 0.5])

    def test_shift_invariance_no_overflow(self):
        out = F.softmax(Tensor([1000.0, 1000.0]), 0)
        npt.assert_allclose(out.data, [0.5, 0.5])
        assert np.all(np.isfinite(out.data))

    def test_closed_form(self):
        out = F.softmax(Tensor(np.array([np.log(2.0), 0.0]), dtype=np.float64), 0)
        npt.assert_allclose(out.data, [2 / 3, 1 / 3], atol=1e-9)

    @pytest.mark.parametrize("scale", [1.0, 1e3])
    def test_sums_to_one(self, rng, scale):
        x = Tensor(rng.standard_normal((4, 7)) * scale, dtype=np.float64)
        out = F.softmax(x, axis=1)
        npt.assert_allclose(out.data.sum(axis=1), 1.0, atol=1e-9)
        if scale == 1.0:  # at extreme spreads the tail underflows to exact zero
            assert np.all(out.data > 0)


class TestLinear:
    def test_identity_weight(self, rng):
        x = rng.standard_normal((3, 4)).astype(np.float32)
        out = F.linear(Tensor(x), Tensor(np.eye(4, dtype=np.float32)))
        npt.assert_array_equal(out.data, x)

    def test_zero_weight_returns_bias(self, rng):
        b = rng.standard_normal(5).astype(np.float32)
        out = F.linear(Tensor(np.ones((2, 3), dtype=np.float32)),
                       Tensor(np.zeros((3, 5), dtype=np.float32)), Tensor(b))
        npt.assert_array_equal(out.data, np.tile(b, (2, 1)))

    def test_matches_triple_loop(self, rng):
        x = rng.standard_normal((2, 3))
        w = rng.standard_normal((3, 4))
        b = rng.standard_normal(4)
        ref = np.zeros((2, 4))
        for i in range(2):
            for j in range(4):
                ref[i, j] = b[j]
                for k in range(3):
                    ref[i, j] += x[i, k] * w[k, j]
        out = F.linear(Tensor(x), Tensor(w), Tensor(b))
        npt.assert_allclose(out.data, ref, atol=1e-6)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError, match="weight rows"):
            F.linear(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))


class TestCrossEntropy:
    def test_two_class_uniform(self):
        loss = F.cross_entropy_loss(Tensor(np.zeros((1, 2)), dtype=np.float64), np.array([0]))
        npt.assert_allclose(loss.item(), np.log(2.0), atol=1e-12)

    def test_confident_correct_is_tiny(self):
        loss = F.cross_entropy_loss(Tensor(np.array([[20.0, -20.0]])), np.array([0]))
        assert loss.item() < 1e-8

    def test_batch_is_mean_of_singles(self):
        logits = np.array([[1.0, -1.0], [-1.0, 1.0]])
        labels = np.array([0, 0])
        both = F.cross_entropy_loss(Tensor(logits, dtype=np.float64), labels).item()
        one = F.cross_entropy_loss(Tensor(logits[:1], dtype=np.float64), labels[:1]).item()
        two = F.cross_entropy_loss(Tensor(logits[1:], dtype=np.float64), labels[1:]).item()
        npt.assert_allclose(both, (one + two) / 2, atol=1e-12)

    def test_out_of_range_label(self):
        with pytest.raises(ValueError, match=r"\[0, 2\)"):
            F.cross_entropy_loss(Tensor(np.zeros((1, 2))), np.array([2]))

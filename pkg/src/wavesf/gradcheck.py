"""Central-difference gradient verification.

Runs in 64-bit only: float32 finite differences cannot resolve the 1e-5
relative-error budget the checks are held to.
"""

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor, no_grad


@dataclass
class GradCheckReport:
    max_rel_err: float
    passed: bool
    tol: float
    worst: tuple = ()  # (tensor index or name, flat coordinate, analytic, numeric)
    per_tensor: dict = field(default_factory=dict)

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} max_rel_err={self.max_rel_err:.3e} (tol {self.tol:.1e}) worst={self.worst}"


def _label(i, t):
    name = getattr(t, "name", "")
    return name if name else f"tensor{i}"


def grad_check(f, params, h=1e-5, tol=1e-5, corrupt=False):
    """Compare analytic gradients of ``f()`` against central differences.

    ``f`` is a zero-argument callable returning a scalar Tensor and closing
    over ``params`` (tensors with requires_grad). Relative error per
    coordinate is |a - n| / max(|a|, |n|, 1e-8); the report carries the worst
    coordinate. ``corrupt`` is a test hook that injects an error into the
    analytic gradients so harness failure paths can be exercised.
    """
    params = list(params)
    for i, p in enumerate(params):
        if p.data.dtype != np.float64:
            raise ValueError(f"grad_check requires float64 tensors, {_label(i, p)} is {p.data.dtype}")
        p.grad = None

    loss = f()
    loss.backward()
    analytic = []
    for i, p in enumerate(params):
        if p.grad is None:
            raise ValueError(f"grad_check: no gradient reached {_label(i, p)}")
        analytic.append(p.grad.copy())
        p.grad = None
    if corrupt:
        analytic[0].reshape(-1)[0] += 1.0

    max_rel = 0.0
    worst = ()
    per_tensor = {}
    with no_grad():
        for i, p in enumerate(params):
            flat = p.data.reshape(-1)
            a_flat = analytic[i].reshape(-1)
            tensor_max = 0.0
            for j in range(flat.size):
                original = flat[j]
                flat[j] = original + h
                up = float(f().data)
                flat[j] = original - h
                down = float(f().data)
                flat[j] = original
                numeric = (up - down) / (2.0 * h)
                a = float(a_flat[j])
                rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
                if rel > tensor_max:
                    tensor_max = rel
                if rel > max_rel:
                    max_rel = rel
                    worst = (_label(i, p), j, a, numeric)
            per_tensor[_label(i, p)] = tensor_max
    return GradCheckReport(max_rel_err=max_rel, passed=max_rel < tol, tol=tol,
                           worst=worst, per_tensor=per_tensor)


def _away_from_kinks(rng, shape, margin=0.05):
    """Random values pushed away from 0 so piecewise ops differentiate cleanly."""
    x = rng.standard_normal(shape)
    return x + margin * np.sign(x)


def standard_checks():
    """Named module-level gradient checks shared by the CLI and the test suite.

    Returns [(name, runner)] where runner(corrupt=False) -> GradCheckReport.
    """
    from . import functional as F
    from .attention import MswSa
    from .hffc import HffcBlock
    from .wavelet import wt_conv
    from .modules import init_conv_weight
    from .tensor import Parameter

    f64 = np.float64

    def make(build):
        def runner(corrupt=False, tol=1e-5):
            f, params = build()
            return grad_check(f, params, tol=tol, corrupt=corrupt)

        return runner

    def quad(out_fn, rng):
        # random affine offset keeps every gradient coordinate resolvable
        from .tensor import no_grad

        with no_grad():
            shape = out_fn().data.shape
        c = rng.standard_normal(shape)
        return lambda: ((out_fn() + c) ** 2).sum()

    def conv_case():
        rng = np.random.default_rng(10)
        x = Tensor(rng.standard_normal((1, 4, 7, 7)), requires_grad=True, dtype=f64)
        w = Tensor(rng.standard_normal((3, 4, 3, 3)) * 0.3, requires_grad=True, dtype=f64)
        b = Tensor(rng.standard_normal(3), requires_grad=True, dtype=f64)
        return (quad(lambda: F.conv2d(x, w, b, stride=2, padding=1), rng), [x, w, b])

    def bn_case():
        rng = np.random.default_rng(11)
        x = Tensor(rng.standard_normal((4, 3, 2, 2)), requires_grad=True, dtype=f64)
        gamma = Tensor(rng.standard_normal(3) + 1.5, requires_grad=True, dtype=f64)
        beta = Tensor(rng.standard_normal(3), requires_grad=True, dtype=f64)
        mean = np.zeros(3)
        var = np.ones(3)
        return (
            quad(lambda: F.batch_norm2d(x, gamma, beta, mean, var, "train"), rng),
            [x, gamma, beta],
        )

    def max_pool_case():
        rng = np.random.default_rng(12)
        x = Tensor(rng.standard_normal((1, 2, 6, 6)), requires_grad=True, dtype=f64)
        return (quad(lambda: F.pool2d(x, "max", 2, 2), rng), [x])

    def avg_pool_case():
        rng = np.random.default_rng(13)
        x = Tensor(rng.standard_normal((1, 2, 6, 6)), requires_grad=True, dtype=f64)
        return (quad(lambda: F.pool2d(x, "avg", 3, 2), rng), [x])

    def relu_case():
        rng = np.random.default_rng(14)
        x = Tensor(_away_from_kinks(rng, (2, 3, 4, 4)), requires_grad=True, dtype=f64)
        return (quad(lambda: F.relu(x), rng), [x])

    def leaky_case():
        rng = np.random.default_rng(16)
        x = Tensor(_away_from_kinks(rng, (2, 3, 4, 4)), requires_grad=True, dtype=f64)
        return (quad(lambda: F.leaky_relu(x, 0.01), rng), [x])

    def sigmoid_case():
        rng = np.random.default_rng(16)
        x = Tensor(rng.standard_normal((2, 5)), requires_grad=True, dtype=f64)
        return (quad(lambda: F.sigmoid(x), rng), [x])

    def softmax_case():
        rng = np.random.default_rng(17)
        x = Tensor(rng.standard_normal((3, 6)), requires_grad=True, dtype=f64)
        return (quad(lambda: F.softmax(x, axis=1), rng), [x])

    def linear_case():
        rng = np.random.default_rng(18)
        x = Tensor(rng.standard_normal((3, 5)), requires_grad=True, dtype=f64)
        w = Tensor(rng.standard_normal((5, 4)) * 0.4, requires_grad=True, dtype=f64)
        b = Tensor(rng.standard_normal(4), requires_grad=True, dtype=f64)
        return (quad(lambda: F.linear(x, w, b), rng), [x, w, b])

    def cross_entropy_case():
        rng = np.random.default_rng(19)
        x = Tensor(rng.standard_normal((4, 5)), requires_grad=True, dtype=f64)
        labels = np.array([0, 2, 4, 1])
        return (lambda: F.cross_entropy_loss(x, labels), [x])

    def wt_conv_case():
        rng = np.random.default_rng(20)
        x = Tensor(rng.standard_normal((1, 2, 8, 8)), requires_grad=True, dtype=f64)
        kernels = [
            Parameter(init_conv_weight(rng, 2, 1, 3, 3, f64)) for _ in range(2)
        ]
        return (quad(lambda: wt_conv(x, kernels), rng), [x] + kernels)

    def msw_sa_case():
        rng = np.random.default_rng(21)
        module = MswSa(rng, 8, 8, cap=4, dtype=f64)
        x = Tensor(rng.standard_normal((1, 4, 8, 8)), requires_grad=True, dtype=f64)
        return (quad(lambda: module.forward(x, "train"), rng), [x] + module.parameters())

    def hffc_case():
        # eval mode: the filter/gate norms see 1x1 maps, degenerate for batch-1 train stats
        rng = np.random.default_rng(22)
        block = HffcBlock(rng, 3, 4, ffe_groups=2, dtype=f64)
        x = Tensor(rng.standard_normal((1, 3, 16, 16)), requires_grad=True, dtype=f64)
        return (quad(lambda: block.forward(x, "eval"), rng), [x] + block.parameters())

    return [
        ("conv2d", make(conv_case)),
        ("batch_norm2d", make(bn_case)),
        ("max_pool", make(max_pool_case)),
        ("avg_pool", make(avg_pool_case)),
        ("relu", make(relu_case)),
        ("leaky_relu", make(leaky_case)),
        ("sigmoid", make(sigmoid_case)),
        ("softmax", make(softmax_case)),
        ("linear", make(linear_case)),
        ("cross_entropy", make(cross_entropy_case)),
        ("wt_conv", make(wt_conv_case)),
        ("msw_sa", make(msw_sa_case)),
        ("hffc", make(hffc_case)),
    ]

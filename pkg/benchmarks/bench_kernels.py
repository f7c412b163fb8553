#!/usr/bin/env python3
"""Benchmark the compiled kernel lane against the numpy fallback.

Times the raw hot kernels (im2col / col2im / max pool) under both lanes in
one process, then a full desk-model training step under the active lane.
Run the step benchmark under each lane with:

    WAVESF_KERNELS=numpy  python3 benchmarks/bench_kernels.py
    WAVESF_KERNELS=cython python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from wavesf import kernels
from wavesf import functional as F
from wavesf.model import ModelConfig, build_model
from wavesf.optim import Adam
from wavesf.tensor import Tensor

SHAPES = [
    ("stage1 3x3 s1", (8, 16, 32, 32), 3, 1),
    ("stage2 3x3 s2", (8, 32, 32, 32), 3, 2),
    ("stage4 3x3 s1", (8, 128, 4, 4), 3, 1),
    ("hffc  3x3 s1", (8, 16, 32, 32), 3, 1),
]


def timeit(fn, repeat=20):
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat


def bench_raw_kernels():
    lanes = ["numpy"]
    try:
        kernels.get_impl("cython")
        lanes.append("cython")
    except Exception:
        print("compiled lane not available; benchmarking numpy only")

    print(f"{'case':>14} {'kernel':>8} " + " ".join(f"{l:>10}" for l in lanes) + "  speedup")
    for name, shape, k, s in SHAPES:
        x = np.random.default_rng(0).standard_normal(shape).astype(np.float32)
        cols = kernels.im2col(x, k, k, s)
        rows = {}
        for lane in lanes:
            impl = kernels.get_impl(lane)
            rows.setdefault("im2col", {})[lane] = timeit(lambda: kernels.im2col(x, k, k, s, impl=impl))
            rows.setdefault("col2im", {})[lane] = timeit(
                lambda: kernels.col2im(cols, shape, k, k, s, impl=impl))
            rows.setdefault("maxpool", {})[lane] = timeit(lambda: kernels.maxpool(x, 2, 2, impl=impl))
        for kern, vals in rows.items():
            cells = " ".join(f"{vals[l] * 1e6:9.1f}u" for l in lanes)
            speed = f"{vals['numpy'] / vals[lanes[-1]]:.2f}x" if len(lanes) == 2 else "-"
            print(f"{name:>14} {kern:>8} {cells}  {speed}")


def bench_model_step():
    model = build_model(ModelConfig(), 7)
    opt = Adam(list(model.named_parameters()))
    rng = np.random.default_rng(0)
    x = Tensor(rng.standard_normal((8, 1, 64, 64)).astype(np.float32))
    labels = rng.integers(0, 8, 8)

    def step():
        loss = F.cross_entropy_loss(model.forward(x, "train"), labels)
        opt.zero_grad()
        loss.backward()
        opt.step(2e-4)

    dt = timeit(step, repeat=10)
    print(f"\nfull training step (batch 8, desk config, lane={kernels.BACKEND}): {dt * 1e3:.1f} ms")


if __name__ == "__main__":
    print(f"active kernel lane: {kernels.BACKEND}")
    bench_raw_kernels()
    bench_model_step()

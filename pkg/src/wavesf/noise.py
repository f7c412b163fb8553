"""Multiplicative speckle corruption, PSNR, calibration, robustness bench.

Speckle follows F = g + g*u with u ~ N(0, s) i.i.d. per pixel, clamped to the
image's intensity range. Calibration bisects the variance s until the
dataset-mean PSNR hits a target; the standard-normal noise field is drawn
once per (seed, image) and rescaled by sqrt(s), which makes mean PSNR a
deterministic, strictly decreasing function of s.
"""

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_PSNR_LADDER = (28.82, 25.46, 23.13, 21.46, 20.22, 19.28)


def add_speckle(image, s, rng, max_val=1.0):
    """F = g * (1 + u), u ~ N(0, s); clamped to [0, max_val]."""
    image = np.asarray(image)
    if s < 0:
        raise ValueError(f"speckle variance must be >= 0, got {s}")
    if s == 0:
        return image.copy()
    u = rng.normal(0.0, math.sqrt(s), size=image.shape)
    return np.clip(image * (1.0 + u), 0.0, max_val).astype(image.dtype, copy=False)


def psnr(clean, noisy, max_val):
    """20*log10(max_val / sqrt(MSE)) in dB; undefined for identical images."""
    clean = np.asarray(clean, dtype=np.float64)
    noisy = np.asarray(noisy, dtype=np.float64)
    if clean.shape != noisy.shape:
        raise ValueError(f"psnr: shape mismatch {clean.shape} vs {noisy.shape}")
    mse = float(((clean - noisy) ** 2).mean())
    if mse == 0.0:
        raise ValueError("psnr: identical images, PSNR undefined/infinite")
    return 20.0 * math.log10(max_val / math.sqrt(mse))


@dataclass
class SpeckleParams:
    s: float
    target_psnr: float
    achieved_psnr: float
    seed: int


def _noise_fields(images, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(np.asarray(images).shape)


def _corrupt_with_fields(images, fields, s, max_val):
    return np.clip(images * (1.0 + math.sqrt(s) * fields), 0.0, max_val)


def mean_psnr_at(images, fields, s, max_val):
    images = np.asarray(images, dtype=np.float64)
    noisy = _corrupt_with_fields(images, fields, s, max_val)
    return float(np.mean([psnr(g, f, max_val) for g, f in zip(images, noisy)]))


def calibrate_speckle(images, target_psnr, tol_db=0.1, seed=0, max_val=1.0, max_iter=60):
    """Bisection on the variance until dataset-mean PSNR is within tol_db of target."""
    if not math.isfinite(target_psnr):
        raise ValueError(f"target PSNR must be finite, got {target_psnr}")
    images = np.asarray(images, dtype=np.float64)
    fields = _noise_fields(images, seed)

    s_hi = 1e-6
    for _ in range(max_iter):
        if mean_psnr_at(images, fields, s_hi, max_val) < target_psnr:
            break
        s_hi *= 2.0
    else:
        raise RuntimeError(f"calibration could not bracket target {target_psnr} dB (s_hi={s_hi:g})")

    s_lo = 0.0  # PSNR(0) = +inf > any finite target
    for _ in range(max_iter):
        mid = 0.5 * (s_lo + s_hi)
        achieved = mean_psnr_at(images, fields, mid, max_val)
        if abs(achieved - target_psnr) <= tol_db:
            return SpeckleParams(mid, target_psnr, achieved, seed)
        if achieved > target_psnr:
            s_lo = mid
        else:
            s_hi = mid
    raise RuntimeError(
        f"calibration did not converge to {target_psnr} +- {tol_db} dB "
        f"(bracket [{s_lo:g}, {s_hi:g}])"
    )


def corrupt_images(images, params: SpeckleParams, max_val=1.0):
    """The exact corrupted set the calibration measured (same seed, same s)."""
    images = np.asarray(images, dtype=np.float64)
    fields = _noise_fields(images, params.seed)
    return _corrupt_with_fields(images, fields, params.s, max_val)


def noise_bench(model, test_images, test_labels, ladder=DEFAULT_PSNR_LADDER,
                seed=0, tol_db=0.1, max_val=1.0, batch_size=32):
    """Accuracy per corruption level; the clean row comes first.

    ``test_images`` are raw [0, 1] resized images (N, 1, S, S); rows carry
    target dB, achieved dB, the calibrated variance, accuracy and macro F1.
    """
    from .data import normalize_stack
    from .metrics import confusion, metrics
    from .train import evaluate

    k = model.cfg.num_classes

    def eval_images(images01):
        _, acc, preds = evaluate(model, normalize_stack(images01.astype(np.float32)),
                                 test_labels, batch_size)
        rep = metrics(confusion(preds, test_labels, k))
        return acc, rep.macro_f1

    rows = []
    acc, mf1 = eval_images(np.asarray(test_images))
    rows.append({"level_db_target": math.inf, "level_db_achieved": math.inf,
                 "s": 0.0, "accuracy": acc, "macro_f1": mf1})
    for i, target in enumerate(ladder):
        params = calibrate_speckle(test_images, target, tol_db, seed=seed + i, max_val=max_val)
        noisy = corrupt_images(test_images, params, max_val)
        acc, mf1 = eval_images(noisy)
        rows.append({"level_db_target": params.target_psnr,
                     "level_db_achieved": params.achieved_psnr,
                     "s": params.s, "accuracy": acc, "macro_f1": mf1})
    return rows


def noise_csv_text(rows):
    lines = ["level_db_target,level_db_achieved,s,accuracy,macro_f1"]
    for r in rows:
        lines.append(
            f"{r['level_db_target']:.10g},{r['level_db_achieved']:.10g},"
            f"{r['s']:.10g},{r['accuracy']:.6f},{r['macro_f1']:.6f}"
        )
    return "\n".join(lines) + "\n"

"""Training-time augmentation on [0, 1] intensity images.

Applied in a fixed order with a fixed draw order (rotation angle, crop area
scale, crop offsets, brightness, contrast, flip coin), so a seeded generator
reproduces the exact same output. Stages whose parameters are neutral draw
nothing and change nothing; an all-disabled config is the identity.
"""

import math
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor


@dataclass
class AugmentConfig:
    rotation_deg: float = 15.0
    crop_scale: tuple = (0.8, 1.2)  # area scale; > 1 becomes zero-padded zoom-out
    jitter: float = 0.20
    hflip_prob: float = 0.5

    def validate(self):
        if self.crop_scale[0] > self.crop_scale[1] or self.crop_scale[0] <= 0:
            raise ValueError(f"bad crop_scale {self.crop_scale}")
        if not 0 <= self.hflip_prob <= 1:
            raise ValueError("hflip_prob must lie in [0, 1]")
        return self


def _sample_bilinear(img, ys, xs):
    """Sample img at float coords (zero fill outside)."""
    h, w = img.shape
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    wy = (ys - y0).astype(np.float32)
    wx = (xs - x0).astype(np.float32)
    out = np.zeros(ys.shape, dtype=np.float32)
    for dy, wgt_y in ((0, 1 - wy), (1, wy)):
        for dx, wgt_x in ((0, 1 - wx), (1, wx)):
            yi = y0 + dy
            xi = x0 + dx
            valid = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
            vals = img[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
            out += np.where(valid, vals * wgt_y * wgt_x, 0.0)
    return out


def rotate_bilinear(img, degrees):
    """Rotate about the image center, zero fill outside."""
    h, w = img.shape
    theta = math.radians(degrees)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64),
                         indexing="ij")
    dy, dx = yy - cy, xx - cx
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    src_y = cy + cos_t * dy - sin_t * dx
    src_x = cx + sin_t * dy + cos_t * dx
    return _sample_bilinear(img, src_y, src_x)


def crop_resize(img, area_scale, off_y, off_x):
    """Resample a window of side sqrt(area_scale)*S back to S x S.

    Scales above 1 read outside the image, which samples as zero (zoom-out
    with zero padding); offsets position the window inside the feasible range.
    """
    h, w = img.shape
    side = math.sqrt(area_scale)
    ys = off_y + (np.arange(h, dtype=np.float64) + 0.5) * side - 0.5
    xs = off_x + (np.arange(w, dtype=np.float64) + 0.5) * side - 0.5
    return _sample_bilinear(img, ys[:, None] + np.zeros((1, w)), xs[None, :] + np.zeros((h, 1)))


def augment(image, cfg: AugmentConfig, rng):
    """Rotate, crop/zoom, jitter brightness and contrast, maybe flip; clamp to [0, 1].

    ``image`` is a (1, H, W) Tensor or array of [0, 1] intensities; the return
    type matches the input type.
    """
    cfg.validate()
    was_tensor = isinstance(image, Tensor)
    img = (image.data if was_tensor else np.asarray(image))[0].astype(np.float32, copy=True)
    h, w = img.shape

    if cfg.rotation_deg != 0:
        angle = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg)
        img = rotate_bilinear(img, angle)

    lo, hi = cfg.crop_scale
    if (lo, hi) != (1.0, 1.0):
        area = rng.uniform(lo, hi)
        side = math.sqrt(area)
        span_y = h - side * h
        span_x = w - side * w
        off_y = rng.uniform(min(0.0, span_y), max(0.0, span_y))
        off_x = rng.uniform(min(0.0, span_x), max(0.0, span_x))
        img = crop_resize(img, area, off_y, off_x)

    if cfg.jitter != 0:
        brightness = rng.uniform(1 - cfg.jitter, 1 + cfg.jitter)
        contrast = rng.uniform(1 - cfg.jitter, 1 + cfg.jitter)
        img = img * brightness
        img = img.mean() + (img - img.mean()) * contrast

    if cfg.hflip_prob > 0 and rng.random() < cfg.hflip_prob:
        img = img[:, ::-1]

    out = np.clip(img, 0.0, 1.0).astype(np.float32)[None]
    return Tensor(out) if was_tensor else out

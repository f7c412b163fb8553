"""Deterministic synthetic 8-class retinal-style dataset.

Every image is a bright horizontal tissue band between two smooth random
boundary curves on a dark textured background; each class adds one
characteristic deterministic perturbation. All randomness flows from a
portable 64-bit splitmix-style generator (constants below), so a fixed seed
produces identical bytes on every platform with IEEE doubles.

Class set (indices follow this order):
    AMD     thickened, undulating lower boundary
    CNV     bright irregular blob below the band
    CSR     dome-shaped lift of the band over a dark fluid pocket
    DME     dark ellipse inside the band
    DR      scattered small dark dots in the band
    DRUSEN  small bright bumps on the lower boundary
    MH      vertical gap carved through the band
    NORMAL  no perturbation
"""

import math
import os
from dataclasses import dataclass

import numpy as np

from .data import DatasetManifest, ManifestEntry, save_manifest
from .pgm import ImageGray, write_pgm

CLASS_NAMES = ("AMD", "CNV", "CSR", "DME", "DR", "DRUSEN", "MH", "NORMAL")

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix64(z):
    z = (z ^ (z >> 30)) * _MIX1 & _MASK64
    z = (z ^ (z >> 27)) * _MIX2 & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Tiny portable RNG: 64-bit counter state advanced by the golden gamma."""

    def __init__(self, seed):
        self._seed0 = seed & _MASK64
        self.state = seed & _MASK64
        self._spare_normal = None

    def next_u64(self):
        self.state = (self.state + _GAMMA) & _MASK64
        return _mix64(self.state)

    def derive(self, *tags):
        """Independent child stream keyed by integer tags (order matters).

        Children depend only on the construction seed and the tags, never on
        how much the parent stream has been consumed.
        """
        s = _mix64(self._seed0 ^ 0xD6E8FEB86659FD93)
        for t in tags:
            s = _mix64(s ^ ((t & _MASK64) * _GAMMA & _MASK64))
        return SplitMix64(s)

    def random(self):
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo, hi):
        return lo + (hi - lo) * self.random()

    def randint(self, n):
        """Uniform integer in [0, n); simple multiply-shift, n << 2^64."""
        return (self.next_u64() * n) >> 64

    def normal(self, mu=0.0, sigma=1.0):
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
        else:
            u1 = 1.0 - self.random()  # avoid log(0)
            u2 = self.random()
            r = math.sqrt(-2.0 * math.log(u1))
            z = r * math.cos(2.0 * math.pi * u2)
            self._spare_normal = r * math.sin(2.0 * math.pi * u2)
        return mu + sigma * z

    def normal_array(self, shape, sigma=1.0):
        flat = np.empty(int(np.prod(shape)), dtype=np.float64)
        for i in range(flat.size):
            flat[i] = self.normal(0.0, sigma)
        return flat.reshape(shape)

    def shuffle(self, seq):
        for i in range(len(seq) - 1, 0, -1):
            j = self.randint(i + 1)
            seq[i], seq[j] = seq[j], seq[i]
        return seq


@dataclass
class SynthConfig:
    size: int = 64
    per_class: int = 16
    seed: int = 1234
    train_frac: float = 0.70
    val_frac: float = 0.15

    def validate(self):
        if self.size < 32 or self.size % 2:
            raise ValueError("synth size must be even and >= 32 so lesions fit")
        if self.per_class < 1:
            raise ValueError("per_class must be >= 1")
        return self


def _ellipse(canvas, cx, cy, rx, ry, value):
    h, w = canvas.shape
    yy = np.arange(h, dtype=np.float64)[:, None]
    xx = np.arange(w, dtype=np.float64)[None, :]
    mask = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
    canvas[mask] = value


def _render(rng: SplitMix64, size, class_name):
    s = float(size)
    yc = s * rng.uniform(0.44, 0.56)
    thick = s * rng.uniform(0.18, 0.26)
    x = np.arange(size, dtype=np.float64)

    def wobble():
        a1 = s * rng.uniform(0.008, 0.022)
        f1 = rng.uniform(0.7, 1.6)
        p1 = rng.uniform(0.0, 2.0 * math.pi)
        a2 = s * rng.uniform(0.003, 0.010)
        f2 = rng.uniform(1.8, 3.2)
        p2 = rng.uniform(0.0, 2.0 * math.pi)
        return a1 * np.sin(2 * math.pi * f1 * x / s + p1) + a2 * np.sin(
            2 * math.pi * f2 * x / s + p2
        )

    top = yc - thick / 2 + wobble()
    bot = yc + thick / 2 + wobble()
    band_val = rng.uniform(0.58, 0.66)
    bg_val = rng.uniform(0.05, 0.07)

    # class perturbation parameters are drawn before painting
    if class_name == "AMD":
        extra = s * rng.uniform(0.08, 0.12)
        und_a = s * rng.uniform(0.030, 0.050)
        und_f = rng.uniform(3.0, 5.0)
        und_p = rng.uniform(0.0, 2.0 * math.pi)
        bot = bot + extra + und_a * np.sin(2 * math.pi * und_f * x / s + und_p)
    dome = None
    if class_name == "CSR":
        cx = s * rng.uniform(0.40, 0.60)
        half = s * rng.uniform(0.22, 0.30)
        amp = s * rng.uniform(0.13, 0.18)
        dome = amp * np.maximum(0.0, 1.0 - ((x - cx) / half) ** 2)
        orig_bot = bot.copy()
        top = top - dome
        bot = bot - dome

    yy = np.arange(size, dtype=np.float64)[:, None]
    canvas = np.full((size, size), bg_val, dtype=np.float64)
    band = (yy >= top[None, :]) & (yy < bot[None, :])
    canvas[band] = band_val
    topline = (yy >= top[None, :]) & (yy < top[None, :] + 1.6)
    canvas[topline] = 0.85

    if class_name == "CSR":
        fluid = (yy >= bot[None, :]) & (yy < orig_bot[None, :]) & (dome[None, :] > 0.5)
        canvas[fluid] = 0.12
    elif class_name == "MH":
        cx = s * rng.uniform(0.38, 0.62)
        half = s * rng.uniform(0.07, 0.11)
        gap = (np.abs(x - cx) < half)[None, :] & (band | topline)
        canvas[gap] = bg_val
    elif class_name == "DRUSEN":
        for _ in range(4 + rng.randint(3)):
            bx = s * rng.uniform(0.15, 0.85)
            by = float(np.interp(bx, x, bot))
            _ellipse(canvas, bx, by, rng.uniform(3.0, 5.0), rng.uniform(3.0, 4.5), 0.85)
    elif class_name == "DME":
        cx = s * rng.uniform(0.35, 0.65)
        cy = float(np.interp(cx, x, (top + bot) / 2))
        _ellipse(canvas, cx, cy, s * rng.uniform(0.12, 0.18), thick * rng.uniform(0.30, 0.45), 0.10)
    elif class_name == "CNV":
        cx = s * rng.uniform(0.32, 0.68)
        cy = float(np.interp(cx, x, bot)) + rng.uniform(2.5, 5.0)
        for _ in range(3):
            _ellipse(canvas, cx + rng.uniform(-4.0, 4.0), cy + rng.uniform(-2.0, 2.5),
                     s * rng.uniform(0.06, 0.11), rng.uniform(3.0, 5.5), 0.78)
    elif class_name == "DR":
        for _ in range(10 + rng.randint(6)):
            dx = s * rng.uniform(0.10, 0.90)
            dt = float(np.interp(dx, x, top))
            db = float(np.interp(dx, x, bot))
            if db - dt > 7.0:
                dy = rng.uniform(dt + 3.0, db - 3.0)
                _ellipse(canvas, dx, dy, rng.uniform(1.8, 2.8), rng.uniform(1.8, 2.8), 0.12)

    # mild background texture everywhere: a smooth field plus fine grain
    coarse = rng.normal_array((8, 8), sigma=0.015)
    from .data import bilinear_resize

    canvas += bilinear_resize(coarse, size, size)
    canvas += rng.normal_array((size, size), sigma=0.010)
    return np.clip(np.rint(np.clip(canvas, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)


def split_counts(n, train_frac=0.70, val_frac=0.15):
    """Per-class boundaries: floor(train_frac*n) train, up to floor((train+val)*n) val, rest test."""
    a = int(math.floor(train_frac * n))
    b = int(math.floor((train_frac + val_frac) * n))
    return a, b - a, n - b


def synth_generate(cfg: SynthConfig, out_dir):
    """Write PGMs plus a manifest; byte-identical for identical (cfg, seed)."""
    cfg.validate()
    master = SplitMix64(cfg.seed)
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    n_train, n_val, _ = split_counts(cfg.per_class, cfg.train_frac, cfg.val_frac)
    for ci, cname in enumerate(CLASS_NAMES):
        os.makedirs(os.path.join(out_dir, cname), exist_ok=True)
        order = master.derive(1000 + ci).shuffle(list(range(cfg.per_class)))
        split_of = {}
        for pos, idx in enumerate(order):
            split_of[idx] = "train" if pos < n_train else ("val" if pos < n_train + n_val else "test")
        for ii in range(cfg.per_class):
            pixels = _render(master.derive(ci, ii), cfg.size, cname)
            rel = os.path.join(cname, f"{cname.lower()}_{ii:04d}.pgm")
            write_pgm(ImageGray(cfg.size, cfg.size, pixels), os.path.join(out_dir, rel))
            entries.append(ManifestEntry(rel, ci, split_of[ii]))
    manifest = DatasetManifest(os.path.abspath(out_dir), entries, list(CLASS_NAMES))
    save_manifest(manifest, os.path.join(out_dir, "manifest.tsv"))
    return manifest

"""Dataset manifests, bilinear resize, and per-image standardization."""

import os
from dataclasses import dataclass

import numpy as np

from .pgm import ImageGray, read_pgm

SPLITS = ("train", "val", "test")
VARIANCE_FLOOR = 1e-6


@dataclass
class ManifestEntry:
    path: str  # relative to the manifest root
    label: int
    split: str


@dataclass
class DatasetManifest:
    root: str
    entries: list
    class_names: list

    def split_entries(self, split):
        if split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
        return [e for e in self.entries if e.split == split]


def save_manifest(manifest: DatasetManifest, path):
    lines = ["# classes: " + ",".join(manifest.class_names)]
    for e in manifest.entries:
        lines.append(f"{e.path}\t{e.label}\t{e.split}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_manifest(path):
    root = os.path.dirname(os.path.abspath(path))
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("# classes:"):
        raise ValueError(f"{path}: first line must be '# classes: name0,name1,...'")
    class_names = [c.strip() for c in lines[0].split(":", 1)[1].split(",")]
    k = len(class_names)
    entries = []
    for ln in lines[1:]:
        parts = ln.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}: malformed manifest line {ln!r}")
        rel, label, split = parts[0], int(parts[1]), parts[2]
        if not 0 <= label < k:
            raise ValueError(f"{path}: class index {label} outside [0, {k})")
        if split not in SPLITS:
            raise ValueError(f"{path}: unknown split {split!r}")
        full = os.path.join(root, rel)
        if not os.path.exists(full):
            raise FileNotFoundError(f"manifest entry missing on disk: {full}")
        entries.append(ManifestEntry(rel, label, split))
    return DatasetManifest(root, entries, class_names)


def bilinear_resize(img, out_h, out_w):
    """Half-pixel-centered bilinear resize of a 2D float array."""
    h, w = img.shape
    if (h, w) == (out_h, out_w):
        return img.astype(np.float32, copy=True)
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    ys = np.clip(ys, 0, h - 1)
    xs = np.clip(xs, 0, w - 1)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0).astype(np.float32)[:, None]
    wx = (xs - x0).astype(np.float32)[None, :]
    img = img.astype(np.float32, copy=False)
    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bottom = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    return top * (1 - wy) + bottom * wy


def to_unit(img):
    """ImageGray or 2D array -> float32 [0, 1] 2D array."""
    if isinstance(img, ImageGray):
        return img.pixels.astype(np.float32) / 255.0
    arr = np.asarray(img)
    if arr.dtype == np.uint8:
        return arr.astype(np.float32) / 255.0
    return arr.astype(np.float32, copy=False)


def normalize_image(unit_img):
    """Zero-mean, unit-variance per image with a 1e-6 variance floor."""
    mu = unit_img.mean()
    var = unit_img.var()
    return ((unit_img - mu) / np.sqrt(max(var, VARIANCE_FLOOR))).astype(np.float32)


def standardize(img, size):
    """Resize to size x size, scale to [0, 1], standardize; returns (1, size, size)."""
    unit = bilinear_resize(to_unit(img), size, size)
    return normalize_image(unit)[None, :, :]


def normalize_stack(raw):
    """Per-image standardization of an already-resized (N, 1, S, S) [0,1] stack."""
    raw = np.asarray(raw, dtype=np.float32)
    mu = raw.mean(axis=(1, 2, 3), keepdims=True)
    var = raw.var(axis=(1, 2, 3), keepdims=True)
    return (raw - mu) / np.sqrt(np.maximum(var, VARIANCE_FLOOR))


def load_split_raw(manifest: DatasetManifest, split, input_size):
    """Resized [0, 1] images of one split: ((N, 1, S, S) float32, (N,) int64)."""
    entries = manifest.split_entries(split)
    if not entries:
        raise ValueError(f"split {split!r} is empty")
    images = np.empty((len(entries), 1, input_size, input_size), dtype=np.float32)
    labels = np.empty(len(entries), dtype=np.int64)
    for i, e in enumerate(entries):
        full = os.path.join(manifest.root, e.path)
        if not os.path.exists(full):
            raise FileNotFoundError(f"dataset file missing: {full}")
        images[i, 0] = bilinear_resize(to_unit(read_pgm(full)), input_size, input_size)
        labels[i] = e.label
    return images, labels


def load_split(manifest: DatasetManifest, split, input_size):
    """Standardized tensors of one split, in manifest order, labels aligned."""
    raw, labels = load_split_raw(manifest, split, input_size)
    return normalize_stack(raw), labels

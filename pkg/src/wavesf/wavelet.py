"""Orthonormal 2D Haar transform and the multi-level wavelet convolution.

One decomposition level maps each non-overlapping 2x2 block [[a, b], [c, d]]
to four half-resolution subbands:

    ll = (a + b + c + d) / 2      lh = (a + b - c - d) / 2
    hl = (a - b + c - d) / 2      hh = (a - b - c + d) / 2

The +-1/2 weights make the filter bank orthonormal: subband energy equals
input energy (Parseval) and the inverse needs no rescaling.
"""

from typing import NamedTuple

import numpy as np

from . import functional as F
from .tensor import Tensor, from_op


class WaveletSubbands(NamedTuple):
    ll: Tensor
    lh: Tensor
    hl: Tensor
    hh: Tensor

    def energy(self):
        return sum(float((b.data**2).sum()) for b in self)


_BAND_SIGNS = {
    "ll": (1.0, 1.0, 1.0, 1.0),
    "lh": (1.0, 1.0, -1.0, -1.0),
    "hl": (1.0, -1.0, 1.0, -1.0),
    "hh": (1.0, -1.0, -1.0, 1.0),
}


def _check_even(x):
    h, w = x.data.shape[2], x.data.shape[3]
    if h % 2 or w % 2:
        raise ValueError(
            f"haar_dwt2d: spatial size {h}x{w} is odd; pad the input to even dimensions first"
        )


def _band(x, signs):
    d = x.data
    a = d[:, :, 0::2, 0::2]
    b = d[:, :, 0::2, 1::2]
    c = d[:, :, 1::2, 0::2]
    e = d[:, :, 1::2, 1::2]
    sa, sb, sc, se = signs
    out = (sa * a + sb * b + sc * c + se * e) * 0.5

    def bw(g):
        gx = np.zeros_like(d)
        gx[:, :, 0::2, 0::2] = sa * 0.5 * g
        gx[:, :, 0::2, 1::2] = sb * 0.5 * g
        gx[:, :, 1::2, 0::2] = sc * 0.5 * g
        gx[:, :, 1::2, 1::2] = se * 0.5 * g
        return (gx,)

    return from_op(out, (x,), bw)


def haar_dwt2d(x):
    """One orthonormal Haar level: NCHW -> four NC(H/2)(W/2) subbands."""
    _check_even(x)
    return WaveletSubbands(*(_band(x, _BAND_SIGNS[k]) for k in ("ll", "lh", "hl", "hh")))


def haar_idwt2d(subbands):
    """Exact inverse of :func:`haar_dwt2d`."""
    ll, lh, hl, hh = subbands
    shape = ll.data.shape
    for name, band in zip(("lh", "hl", "hh"), (lh, hl, hh)):
        if band.data.shape != shape:
            raise ValueError(
                f"haar_idwt2d: subband {name} has shape {band.data.shape}, expected {shape}"
            )
    n, c, h, w = shape
    dll, dlh, dhl, dhh = ll.data, lh.data, hl.data, hh.data
    out = np.empty((n, c, 2 * h, 2 * w), dtype=dll.dtype)
    out[:, :, 0::2, 0::2] = (dll + dlh + dhl + dhh) * 0.5
    out[:, :, 0::2, 1::2] = (dll + dlh - dhl - dhh) * 0.5
    out[:, :, 1::2, 0::2] = (dll - dlh + dhl - dhh) * 0.5
    out[:, :, 1::2, 1::2] = (dll - dlh - dhl + dhh) * 0.5

    def bw(g):
        ga = g[:, :, 0::2, 0::2]
        gb = g[:, :, 0::2, 1::2]
        gc = g[:, :, 1::2, 0::2]
        gd = g[:, :, 1::2, 1::2]
        return (
            (ga + gb + gc + gd) * 0.5,
            (ga + gb - gc - gd) * 0.5,
            (ga - gb + gc - gd) * 0.5,
            (ga - gb - gc + gd) * 0.5,
        )

    return from_op(out, (ll, lh, hl, hh), bw)


def highfreq_sum(subbands):
    """Elementwise lh + hl + hh: the detail content of one level."""
    return subbands.lh + subbands.hl + subbands.hh


def levels_for_size(h, w, cap=4):
    """How many Haar levels fit: min(cap, floor(log2(min(h, w))))."""
    if h < 2 or w < 2:
        raise ValueError(f"levels_for_size: need spatial size >= 2, got {h}x{w}")
    return min(cap, min(h, w).bit_length() - 1)


def wt_conv(x, level_kernels):
    """Multi-level wavelet convolution: filter every approximation band in place.

    Decomposes ``x`` level by level (always recursing on the LL band), applies
    the matching depthwise kernel to each level's LL with same-size zero
    padding, then reconstructs bottom-up, summing each level's filtered map
    with the reconstruction of the deeper levels and reusing the untouched
    detail subbands. Output shape equals input shape; linear in ``x`` for
    fixed kernels and fully differentiable.
    """
    levels = len(level_kernels)
    h, w = x.data.shape[2], x.data.shape[3]
    if min(h, w) < 2**levels:
        raise ValueError(
            f"wt_conv: {levels} levels need spatial size >= {2 ** levels}, got {h}x{w}"
        )
    stack = []
    current = x
    for kern in level_kernels:
        bands = haar_dwt2d(current)
        stack.append(bands)
        current = bands.ll

    filtered = []
    for bands, kern in zip(stack, level_kernels):
        channels = bands.ll.data.shape[1]
        k = kern.data.shape[2]
        filtered.append(
            F.conv2d(bands.ll, kern, stride=1, padding=k // 2, pad_mode="zero", groups=channels)
        )

    recon = filtered[-1]
    for lvl in range(levels - 2, -1, -1):
        deeper = stack[lvl + 1]
        recon = filtered[lvl] + haar_idwt2d(
            WaveletSubbands(recon, deeper.lh, deeper.hl, deeper.hh)
        )
    top = stack[0]
    return haar_idwt2d(WaveletSubbands(recon, top.lh, top.hl, top.hh))

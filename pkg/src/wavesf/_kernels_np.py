"""Numpy reference implementations of the hot kernels.

These are the fallback for the compiled module in ``_kernels_cy``; both lanes
must produce bit-identical results (same accumulation order), so tests and
checkpoints do not depend on which lane got selected.
"""

import numpy as np


def im2col(x, kh, kw, sh, sw, out):
    """Gather (kh, kw) patches of ``x`` (N,C,H,W) into ``out`` (N, C*kh*kw, OH*OW)."""
    n, c, h, w = x.shape
    oh = (h - kh) // sh + 1
    ow = (w - kw) // sw + 1
    sb, sc, srow, scol = x.strides
    patches = np.lib.stride_tricks.as_strided(
        x,
        shape=(n, c, kh, kw, oh, ow),
        strides=(sb, sc, srow, scol, sh * srow, sw * scol),
        writeable=False,
    )
    np.copyto(out, patches.reshape(n, c * kh * kw, oh * ow))
    return out


def col2im(cols, kh, kw, sh, sw, out):
    """Scatter-add columns back onto the (already zeroed) image ``out`` (N,C,H,W).

    Accumulation order is (ki, kj) ascending per target pixel, matching the
    compiled lane exactly.
    """
    n, c, h, w = out.shape
    oh = (h - kh) // sh + 1
    ow = (w - kw) // sw + 1
    shaped = cols.reshape(n, c, kh, kw, oh, ow)
    for ki in range(kh):
        for kj in range(kw):
            out[:, :, ki : ki + sh * oh : sh, kj : kj + sw * ow : sw] += shaped[:, :, ki, kj]
    return out


def maxpool(x, k, s, out, idx):
    """Max pool ``x`` (N,C,H,W) with window ``k`` stride ``s``.

    ``out`` receives the pooled values, ``idx`` the flat h*W+w index of the
    winning element (first occurrence in row-major window order on ties).
    """
    n, c, h, w = x.shape
    oh = (h - k) // s + 1
    ow = (w - k) // s + 1
    sb, sc, srow, scol = x.strides
    windows = np.lib.stride_tricks.as_strided(
        x,
        shape=(n, c, oh, ow, k, k),
        strides=(sb, sc, s * srow, s * scol, srow, scol),
        writeable=False,
    )
    flat = windows.reshape(n, c, oh, ow, k * k)
    win_idx = flat.argmax(axis=-1)
    np.copyto(out, np.take_along_axis(flat, win_idx[..., None], axis=-1)[..., 0])
    rows = np.arange(oh)[:, None] * s + win_idx // k
    cols_ = np.arange(ow)[None, :] * s + win_idx % k
    np.copyto(idx, rows * w + cols_)
    return out, idx


def maxpool_backward(gout, idx, gx):
    """Route pooled gradients to the argmax positions of the (zeroed) ``gx``."""
    n, c = gx.shape[0], gx.shape[1]
    flat = gx.reshape(n, c, -1)
    bi = np.arange(n)[:, None, None, None]
    ci = np.arange(c)[None, :, None, None]
    np.add.at(flat, (bi, ci, idx), gout)
    return gx

"""Kernel lane selection: compiled Cython core when available, numpy otherwise.

Set ``WAVESF_KERNELS=numpy`` or ``WAVESF_KERNELS=cython`` to force a lane
(``cython`` raises if the extension is missing); default ``auto`` prefers the
compiled lane. Both lanes are bit-identical, so the choice only affects speed.
"""

import os

import numpy as np

from . import _kernels_np

_choice = os.environ.get("WAVESF_KERNELS", "auto").lower()
if _choice not in ("auto", "numpy", "cython"):
    raise RuntimeError(f"WAVESF_KERNELS must be auto|numpy|cython, got {_choice!r}")

_impl = _kernels_np
BACKEND = "numpy"
if _choice in ("auto", "cython"):
    try:
        from . import _kernels_cy as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        if _choice == "cython":
            raise RuntimeError("WAVESF_KERNELS=cython but the compiled extension is not built")


def get_impl(name=None):
    """Return a kernel module by lane name (``None`` selects the active lane)."""
    if name is None:
        return _impl
    if name == "numpy":
        return _kernels_np
    if name == "cython":
        from . import _kernels_cy

        return _kernels_cy
    raise ValueError(f"unknown kernel lane {name!r}")


def conv_out_size(h, w, kh, kw, sh, sw):
    return (h - kh) // sh + 1, (w - kw) // sw + 1


def im2col(x, kh, kw, stride, impl=None):
    """(N,C,H,W) -> (N, C*kh*kw, OH*OW) patch matrix; ``x`` must be unpadded-ready."""
    impl = impl or _impl
    n, c, h, w = x.shape
    oh, ow = conv_out_size(h, w, kh, kw, stride, stride)
    out = np.empty((n, c * kh * kw, oh * ow), dtype=x.dtype)
    impl.im2col(np.ascontiguousarray(x), kh, kw, stride, stride, out)
    return out


def col2im(cols, x_shape, kh, kw, stride, impl=None):
    """Adjoint of :func:`im2col`: scatter-add columns into a zeroed (N,C,H,W) image."""
    impl = impl or _impl
    out = np.zeros(x_shape, dtype=cols.dtype)
    impl.col2im(np.ascontiguousarray(cols), kh, kw, stride, stride, out)
    return out


def maxpool(x, k, s, impl=None):
    """Returns (pooled, argmax_flat_index); ties go to the first row-major element."""
    impl = impl or _impl
    n, c, h, w = x.shape
    oh, ow = conv_out_size(h, w, k, k, s, s)
    out = np.empty((n, c, oh, ow), dtype=x.dtype)
    idx = np.empty((n, c, oh, ow), dtype=np.int64)
    impl.maxpool(np.ascontiguousarray(x), k, s, out, idx)
    return out, idx


def maxpool_backward(gout, idx, x_shape, impl=None):
    impl = impl or _impl
    gx = np.zeros(x_shape, dtype=gout.dtype)
    impl.maxpool_backward(np.ascontiguousarray(gout), idx, gx)
    return gx

"""Differentiable neural-net primitives on top of the tensor engine.

Convolution uses the cross-correlation convention (no kernel flip). All ops
are deterministic single-threaded reference implementations; the only
backend-dependent pieces (patch gather/scatter, max pooling) go through
:mod:`wavesf.kernels`, whose lanes are bit-identical.
"""

import numpy as np

from . import kernels
from .tensor import from_op


def _pad2d(data, amount, mode):
    if amount == 0:
        return data
    widths = ((0, 0), (0, 0), (amount, amount), (amount, amount))
    if mode == "zero":
        return np.pad(data, widths, mode="constant")
    if mode == "reflect":
        return np.pad(data, widths, mode="reflect")
    raise ValueError(f"unknown padding mode {mode!r}")


def _pad2d_backward(g, amount, mode, x_shape):
    """Fold gradients of a padded map back onto the interior."""
    if amount == 0:
        return g
    p = amount
    h, w = x_shape[2], x_shape[3]
    if mode == "zero":
        return np.ascontiguousarray(g[:, :, p : p + h, p : p + w])
    # reflect: fold each mirrored border row/column back onto its source
    g1 = g[:, :, :, p : p + w].copy()
    for j in range(1, p + 1):
        g1[:, :, :, j] += g[:, :, :, p - j]
        g1[:, :, :, w - 1 - j] += g[:, :, :, p + w - 1 + j]
    gx = g1[:, :, p : p + h, :].copy()
    for i in range(1, p + 1):
        gx[:, :, i, :] += g1[:, :, p - i, :]
        gx[:, :, h - 1 - i, :] += g1[:, :, p + h - 1 + i, :]
    return gx


def conv2d(x, weight, bias=None, stride=1, padding=0, pad_mode="zero", groups=1):
    """2D cross-correlation of NCHW input with OIKK weights.

    Output spatial size is floor((H + 2*padding - K) / stride) + 1.
    """
    n, c, h, w = x.data.shape
    o, i, kh, kw = weight.data.shape
    if c % groups != 0:
        raise ValueError(f"conv2d: {groups} groups do not divide {c} input channels")
    if o % groups != 0:
        raise ValueError(f"conv2d: {groups} groups do not divide {o} output channels")
    if i != c // groups:
        raise ValueError(
            f"conv2d: weight expects {i * groups} input channels (groups={groups}), got {c}"
        )
    hp, wp = h + 2 * padding, w + 2 * padding
    if kh > hp or kw > wp:
        raise ValueError(f"conv2d: kernel {kh}x{kw} exceeds padded input {hp}x{wp}")

    xpad = _pad2d(x.data, padding, pad_mode)
    oh, ow = kernels.conv_out_size(hp, wp, kh, kw, stride, stride)
    cg = c // groups
    og = o // groups
    w2 = weight.data.reshape(groups, og, cg * kh * kw)

    if groups == 1:
        cols = kernels.im2col(xpad, kh, kw, stride)
        out = np.matmul(w2[0], cols)
        group_cols = (cols,)
    else:
        group_cols = tuple(
            kernels.im2col(np.ascontiguousarray(xpad[:, g * cg : (g + 1) * cg]), kh, kw, stride)
            for g in range(groups)
        )
        out = np.concatenate(
            [np.matmul(w2[g], group_cols[g]) for g in range(groups)], axis=1
        )
    out = out.reshape(n, o, oh, ow)
    if bias is not None:
        out = out + bias.data.reshape(1, o, 1, 1)

    def bw(g):
        g2 = g.reshape(n, o, oh * ow)
        dw = np.empty_like(weight.data).reshape(groups, og, cg * kh * kw)
        dcols = []
        for gi in range(groups):
            gg = g2[:, gi * og : (gi + 1) * og]
            dw[gi] = np.matmul(gg, group_cols[gi].transpose(0, 2, 1)).sum(axis=0)
            dcols.append(np.matmul(w2[gi].T, gg))
        if groups == 1:
            dxpad = kernels.col2im(dcols[0], (n, c, hp, wp), kh, kw, stride)
        else:
            dxpad = np.concatenate(
                [
                    kernels.col2im(dcols[gi], (n, cg, hp, wp), kh, kw, stride)
                    for gi in range(groups)
                ],
                axis=1,
            )
        dx = _pad2d_backward(dxpad, padding, pad_mode, x.data.shape)
        db = None if bias is None else g.sum(axis=(0, 2, 3))
        return (dx, dw.reshape(weight.data.shape), db)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return from_op(out, parents, bw)


def batch_norm2d(x, gamma, beta, running_mean, running_var, mode="train", eps=1e-5, momentum=0.1):
    """Per-channel batch normalization over (N, H, W).

    Train mode normalizes by batch statistics (population variance, divisor
    N*H*W) and updates the running buffers in place; eval mode uses the
    running buffers.
    """
    n, c, h, w = x.data.shape
    if mode == "train":
        m = n * h * w
        if m < 2:
            raise ValueError(f"batch_norm2d: train mode needs N*H*W >= 2, got {m}")
        mu = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var
    elif mode == "eval":
        mu = running_mean.astype(x.data.dtype, copy=False)
        var = running_var.astype(x.data.dtype, copy=False)
    else:
        raise ValueError(f"batch_norm2d: mode must be train|eval, got {mode!r}")

    istd = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu.reshape(1, c, 1, 1)) * istd.reshape(1, c, 1, 1)
    out = gamma.data.reshape(1, c, 1, 1) * xhat + beta.data.reshape(1, c, 1, 1)

    def bw(g):
        dgamma = (g * xhat).sum(axis=(0, 2, 3))
        dbeta = g.sum(axis=(0, 2, 3))
        scale = (gamma.data * istd).reshape(1, c, 1, 1)
        if mode == "eval":
            return (g * scale, dgamma, dbeta)
        m = n * h * w
        dx = scale * (g - dbeta.reshape(1, c, 1, 1) / m - xhat * dgamma.reshape(1, c, 1, 1) / m)
        return (dx, dgamma, dbeta)

    return from_op(out, (x, gamma, beta), bw)


def pool2d(x, kind, window, stride=None):
    """Max or average pooling; max routes gradient to the first argmax on ties."""
    stride = window if stride is None else stride
    n, c, h, w = x.data.shape
    if window > h or window > w:
        raise ValueError(f"pool2d: window {window} larger than input {h}x{w}")
    if kind == "max":
        out, idx = kernels.maxpool(x.data, window, stride)
        shape = x.data.shape
        return from_op(out, (x,), lambda g: (kernels.maxpool_backward(g, idx, shape),))
    if kind == "avg":
        cols = kernels.im2col(x.data, window, window, stride)
        k2 = window * window
        oh, ow = kernels.conv_out_size(h, w, window, window, stride, stride)
        out = cols.reshape(n, c, k2, oh * ow).mean(axis=2).reshape(n, c, oh, ow)

        def bw(g):
            tiled = np.broadcast_to(
                g.reshape(n, c, 1, oh * ow) / k2, (n, c, k2, oh * ow)
            ).reshape(n, c * k2, oh * ow)
            return (kernels.col2im(tiled, x.data.shape, window, window, stride),)

        return from_op(out, (x,), bw)
    raise ValueError(f"pool2d: kind must be max|avg, got {kind!r}")


def global_avg_pool(x):
    """Mean over the spatial dims: (N,C,H,W) -> (N,C,1,1)."""
    n, c, h, w = x.data.shape
    out = x.data.mean(axis=(2, 3), keepdims=True)

    def bw(g):
        return (np.broadcast_to(g / (h * w), x.data.shape).copy(),)

    return from_op(out, (x,), bw)


def relu(x):
    mask = x.data > 0
    return from_op(np.where(mask, x.data, 0), (x,), lambda g: (np.where(mask, g, 0),))


def leaky_relu(x, alpha=0.01):
    mask = x.data > 0
    return from_op(
        np.where(mask, x.data, alpha * x.data),
        (x,),
        lambda g: (np.where(mask, g, alpha * g),),
    )


def sigmoid(x):
    d = x.data
    y = np.empty_like(d)
    pos = d >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    y[~pos] = ex / (1.0 + ex)
    return from_op(y, (x,), lambda g: (g * y * (1.0 - y),))


def activate(x, kind, alpha=0.01):
    """Dispatch by name: relu | leaky_relu | sigmoid."""
    if kind == "relu":
        return relu(x)
    if kind == "leaky_relu":
        return leaky_relu(x, alpha)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation {kind!r}")


def softmax(x, axis):
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return from_op(y, (x,), bw)


def linear(x, weight, bias=None):
    """Affine map: (N,D) @ (D,M) + (M,)."""
    if x.data.shape[-1] != weight.data.shape[0]:
        raise ValueError(
            f"linear: input dim {x.data.shape[-1]} != weight rows {weight.data.shape[0]}"
        )
    out = x.data @ weight.data
    if bias is not None:
        out = out + bias.data

    def bw(g):
        db = None if bias is None else g.sum(axis=0)
        return (g @ weight.data.T, x.data.T @ g, db)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return from_op(out, parents, bw)


def log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cross_entropy_loss(logits, labels):
    """Mean negative log-likelihood of integer labels under softmax(logits)."""
    labels = np.asarray(labels)
    n, k = logits.data.shape
    if labels.shape != (n,):
        raise ValueError(f"cross_entropy: expected {n} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"cross_entropy: labels must lie in [0, {k})")
    logp = log_softmax(logits.data)
    loss = -logp[np.arange(n), labels].mean()

    def bw(g):
        grad = np.exp(logp)
        grad[np.arange(n), labels] -= 1.0
        return (grad * (g / n),)

    return from_op(np.asarray(loss, dtype=logits.data.dtype), (logits,), bw)


def channel_max(x):
    """Max over the channel axis, keepdims; gradient to the first argmax on ties."""
    idx = x.data.argmax(axis=1, keepdims=True)
    out = np.take_along_axis(x.data, idx, axis=1)

    def bw(g):
        gx = np.zeros_like(x.data)
        np.put_along_axis(gx, idx, g, axis=1)
        return (gx,)

    return from_op(out, (x,), bw)


def channel_mean(x):
    c = x.data.shape[1]
    out = x.data.mean(axis=1, keepdims=True)

    def bw(g):
        return (np.broadcast_to(g / c, x.data.shape).copy(),)

    return from_op(out, (x,), bw)


def reflect_pad2d(x, amount):
    """Differentiable reflection padding (mirror without edge repeat)."""
    shape = x.data.shape
    return from_op(
        _pad2d(x.data, amount, "reflect"),
        (x,),
        lambda g: (_pad2d_backward(g, amount, "reflect", shape),),
    )


def group_filter2d(xpad, filt, groups, out_hw):
    """Convolve channel groups with per-sample k*k filters (shared within a group).

    ``xpad`` is (N, C, H+k-1, W+k-1) already padded, ``filt`` is (N, G, k, k);
    gradients flow to both.
    """
    n, c, hp, wp = xpad.data.shape
    k = filt.data.shape[2]
    h, w = out_hw
    cg = c // groups
    cols = kernels.im2col(xpad.data, k, k, 1)  # (N, C*k*k, H*W)
    view = cols.reshape(n, groups, cg, k * k, h * w)
    f = filt.data.reshape(n, groups, 1, k * k, 1)
    out = (view * f).sum(axis=3).reshape(n, c, h, w)

    def bw(g):
        ge = g.reshape(n, groups, cg, 1, h * w)
        dfilt = (ge * view).sum(axis=(2, 4)).reshape(filt.data.shape)
        dcols = (ge * f).reshape(n, c * k * k, h * w)
        dxpad = kernels.col2im(dcols, xpad.data.shape, k, k, 1)
        return (dxpad, dfilt)

    return from_op(out, (xpad, filt), bw)

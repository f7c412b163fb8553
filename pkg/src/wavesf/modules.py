"""Minimal module tree: named parameters, named buffers, deterministic init.

Parameter names are slash-separated placement paths assigned by walking the
attribute tree in definition order, so two builds from the same seed produce
identical names and identical values.
"""

import numpy as np

from .tensor import Parameter


def init_conv_weight(rng, out_ch, in_ch, kh, kw, dtype):
    """Fan-in scaled normal: std = sqrt(2 / (in_ch * kh * kw))."""
    std = np.sqrt(2.0 / (in_ch * kh * kw))
    return (rng.standard_normal((out_ch, in_ch, kh, kw)) * std).astype(dtype)


def init_linear_weight(rng, d_in, d_out, dtype):
    std = np.sqrt(2.0 / d_in)
    return (rng.standard_normal((d_in, d_out)) * std).astype(dtype)


class Module:
    def __init__(self):
        self._buffers = {}

    def register_buffer(self, name, array):
        self._buffers[name] = array

    def _children(self):
        for key, value in vars(self).items():
            if key == "_buffers":
                continue
            if isinstance(value, Module):
                yield key, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{key}{i}", item

    def named_parameters(self, prefix=""):
        for key, value in vars(self).items():
            if isinstance(value, Parameter):
                yield (f"{prefix}{key}", value)
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Parameter):
                        yield (f"{prefix}{key}{i}", item)
        for key, child in self._children():
            yield from child.named_parameters(f"{prefix}{key}/")

    def named_buffers(self, prefix=""):
        for key, array in self._buffers.items():
            yield (f"{prefix}{key}", array)
        for key, child in self._children():
            yield from child.named_buffers(f"{prefix}{key}/")

    def named_tensors(self):
        """Parameters then buffers, in walk order; the checkpoint manifest."""
        out = list(self.named_parameters())
        for name, arr in self.named_buffers():
            out.append((name, arr))
        return out

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def assign_names(self):
        names = set()
        for name, p in self.named_parameters():
            if name in names:
                raise ValueError(f"duplicate parameter name {name!r}")
            names.add(name)
            p.name = name
        return names

    def param_count(self):
        return sum(p.data.size for p in self.parameters())

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def load_values(self, mapping):
        """Copy a {name: array} mapping onto parameters and buffers, strictly."""
        own = dict(self.named_tensors())
        missing = set(own) - set(mapping)
        extra = set(mapping) - set(own)
        if missing or extra:
            raise ValueError(
                f"state mismatch: missing={sorted(missing)[:3]} extra={sorted(extra)[:3]}"
            )
        for name, target in own.items():
            src = mapping[name]
            if tuple(src.shape) != tuple(target.shape if isinstance(target, np.ndarray) else target.data.shape):
                raise ValueError(f"shape mismatch for {name}")
            if isinstance(target, np.ndarray):
                target[...] = src
            else:
                target.data[...] = src.astype(target.data.dtype, copy=False)

    def state_copy(self):
        """Deep copy of all named tensors (for best-checkpoint tracking)."""
        out = {}
        for name, t in self.named_tensors():
            arr = t if isinstance(t, np.ndarray) else t.data
            out[name] = arr.copy()
        return out


class Conv2d(Module):
    def __init__(self, rng, in_ch, out_ch, kernel, stride=1, padding=0,
                 pad_mode="zero", groups=1, bias=True, dtype=np.float32):
        super().__init__()
        self.stride = stride
        self.padding = padding
        self.pad_mode = pad_mode
        self.groups = groups
        self.weight = Parameter(init_conv_weight(rng, out_ch, in_ch // groups, kernel, kernel, dtype))
        self.bias = Parameter(np.zeros(out_ch, dtype=dtype)) if bias else None

    def forward(self, x):
        from . import functional as F

        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding,
                        self.pad_mode, self.groups)


class Linear(Module):
    def __init__(self, rng, d_in, d_out, bias=True, dtype=np.float32):
        super().__init__()
        self.weight = Parameter(init_linear_weight(rng, d_in, d_out, dtype))
        self.bias = Parameter(np.zeros(d_out, dtype=dtype)) if bias else None

    def forward(self, x):
        from . import functional as F

        return F.linear(x, self.weight, self.bias)


class BatchNorm2d(Module):
    def __init__(self, channels, eps=1e-5, momentum=0.1, dtype=np.float32):
        super().__init__()
        self.eps = eps
        self.momentum = momentum
        self.gamma = Parameter(np.ones(channels, dtype=dtype))
        self.beta = Parameter(np.zeros(channels, dtype=dtype))
        self.register_buffer("running_mean", np.zeros(channels, dtype=dtype))
        self.register_buffer("running_var", np.ones(channels, dtype=dtype))

    def forward(self, x, mode):
        from . import functional as F

        return F.batch_norm2d(x, self.gamma, self.beta,
                              self._buffers["running_mean"], self._buffers["running_var"],
                              mode, self.eps, self.momentum)

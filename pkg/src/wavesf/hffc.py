"""High-frequency feature compensation (HFFC) block.

Each block runs: 3x3 entry convolution (raising the channel count) ->
LeakyReLU -> batch norm -> frequency feature extraction (FFE) -> 3x3 exit
convolution -> 2x2 max pool, halving the spatial size.

FFE splits the map into a learned low-pass part and its exact complement,
gates each with an SE-style channel attention, and fuses them with a
complementary per-channel soft weight:

    out = L * c + H * (1 - c),   c = gate_fuse(L + H) in (0, 1)

Ablation variants: ``no_selection`` keeps only the decomposition (output is
y_low + y_high), ``no_decomposition`` gates the raw input directly, ``off``
removes FFE entirely.
"""

import numpy as np

from . import functional as F
from .modules import BatchNorm2d, Conv2d, Module

FFE_VARIANTS = ("full", "no_selection", "no_decomposition", "off")


def freq_decompose(x, filt):
    """Split ``x`` into a filtered low band and its exact complement.

    ``filt`` is a per-sample (N, G, k, k) stack of non-negative kernels that
    each sum to one; channel group g is convolved with kernel g after
    reflection padding, so constants pass through unchanged (unit DC gain)
    and y_low + y_high reproduces ``x`` up to float rounding.
    """
    n, c, h, w = x.data.shape
    groups = filt.data.shape[1]
    k = filt.data.shape[2]
    if c % groups != 0:
        raise ValueError(f"freq_decompose: {groups} groups do not divide {c} channels")
    padded = F.reflect_pad2d(x, (k - 1) // 2)
    y_low = F.group_filter2d(padded, filt, groups, (h, w))
    y_high = x - y_low
    return y_low, y_high


class ChannelGate(Module):
    """SE-style channel attention with pointwise convolutions.

    Squeeze (GAP) -> 1x1 conv to C/r -> BN -> ReLU -> 1x1 conv back -> BN,
    then a two-way softmax of each logit against zero (a sigmoid), giving a
    per-channel weight strictly inside (0, 1).
    """

    def __init__(self, rng, channels, reduction=4, dtype=np.float32):
        super().__init__()
        hidden = max(1, channels // reduction)
        self.hidden = hidden
        self.squeeze = Conv2d(rng, channels, hidden, kernel=1, bias=False, dtype=dtype)
        self.squeeze_norm = BatchNorm2d(hidden, dtype=dtype)
        self.expand = Conv2d(rng, hidden, channels, kernel=1, bias=False, dtype=dtype)
        self.expand_norm = BatchNorm2d(channels, dtype=dtype)

    def forward(self, x, mode):
        h = F.global_avg_pool(x)
        h = F.relu(self.squeeze_norm.forward(self.squeeze.forward(h), mode))
        logits = self.expand_norm.forward(self.expand.forward(h), mode)
        return F.sigmoid(logits)


class Ffe(Module):
    """Frequency feature extraction: dynamic decomposition + selection/fusion."""

    def __init__(self, rng, channels, kernel=3, groups=4, reduction=4, dtype=np.float32):
        super().__init__()
        if channels % groups != 0:
            raise ValueError(f"ffe: {groups} groups do not divide {channels} channels")
        self.kernel = kernel
        self.groups = groups
        self.filter_gen = Conv2d(rng, channels, kernel * kernel * groups, kernel=1,
                                 bias=False, dtype=dtype)
        self.filter_norm = BatchNorm2d(kernel * kernel * groups, dtype=dtype)
        self.gate_low = ChannelGate(rng, channels, reduction, dtype)
        self.gate_high = ChannelGate(rng, channels, reduction, dtype)
        self.gate_fuse = ChannelGate(rng, channels, reduction, dtype)

    def lowpass_filter(self, x, mode):
        """Per-sample, per-group k*k filter; softmax over the k*k positions."""
        n = x.data.shape[0]
        k, g = self.kernel, self.groups
        logits = self.filter_norm.forward(self.filter_gen.forward(F.global_avg_pool(x)), mode)
        weights = F.softmax(logits.reshape(n, g, k * k), axis=2)
        return weights.reshape(n, g, k, k)

    def forward(self, x, mode, variant="full"):
        if variant not in FFE_VARIANTS:
            raise ValueError(f"ffe: unknown variant {variant!r}")
        if variant == "off":
            return x
        if variant == "no_decomposition":
            low, high = x, x
        else:
            filt = self.lowpass_filter(x, mode)
            low, high = freq_decompose(x, filt)
            if variant == "no_selection":
                return low + high
        local_low = low * self.gate_low.forward(low, mode)
        local_high = high * self.gate_high.forward(high, mode)
        fuse = self.gate_fuse.forward(local_low + local_high, mode)
        return local_low * fuse + local_high * (1.0 - fuse)


class HffcBlock(Module):
    """One compensation stage; output is (N, out_ch, H/2, W/2)."""

    def __init__(self, rng, in_ch, out_ch, leaky_alpha=0.01, ffe_kernel=3,
                 ffe_groups=4, reduction=4, dtype=np.float32):
        super().__init__()
        if out_ch < in_ch:
            raise ValueError(f"hffc block must not shrink channels: {in_ch} -> {out_ch}")
        self.leaky_alpha = leaky_alpha
        self.entry = Conv2d(rng, in_ch, out_ch, kernel=3, padding=1, bias=True, dtype=dtype)
        self.entry_norm = BatchNorm2d(out_ch, dtype=dtype)
        self.ffe = Ffe(rng, out_ch, ffe_kernel, ffe_groups, reduction, dtype)
        self.exit = Conv2d(rng, out_ch, out_ch, kernel=3, padding=1, bias=True, dtype=dtype)

    def forward(self, x, mode, variant="full"):
        h = F.leaky_relu(self.entry.forward(x), self.leaky_alpha)
        h = self.entry_norm.forward(h, mode)
        h = self.ffe.forward(h, mode, variant)
        h = self.exit.forward(h)
        return F.pool2d(h, "max", 2, 2)

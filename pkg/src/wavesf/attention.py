"""Multi-scale wavelet spatial attention (MSW-SA).

The module compresses channels to a single perception map, runs wavelet
convolutions at every depth from 1 to n (n chosen from the feature size),
batch-normalizes each branch, sums them, reduces with a 1x1 convolution and
gates the input residually:

    out = x + x * sigmoid(reduce(sum_i bn_i(wavelet_conv_i(compress(x)))))

The attention path works at the input resolution; all down/upsampling happens
inside the wavelet convolutions, so no padding is introduced.
"""

import numpy as np

from . import functional as F
from .modules import BatchNorm2d, Conv2d, Module, init_conv_weight
from .tensor import Parameter, concat
from .wavelet import levels_for_size, wt_conv


def channel_compress(x, mode="sum"):
    """Fold channels into a perception map.

    ``sum`` adds the channelwise max and mean (one output channel);
    ``concat`` stacks them (two output channels).
    """
    cmax = F.channel_max(x)
    cavg = F.channel_mean(x)
    if mode == "sum":
        return cmax + cavg
    if mode == "concat":
        return concat([cmax, cavg], axis=1)
    raise ValueError(f"channel_compress: mode must be sum|concat, got {mode!r}")


class WaveletConvStack(Module):
    """Depthwise 3x3 kernels, one per decomposition level."""

    def __init__(self, rng, channels, levels, kernel=3, dtype=np.float32):
        super().__init__()
        self.levels = levels
        self.kernels = [
            Parameter(init_conv_weight(rng, channels, 1, kernel, kernel, dtype))
            for _ in range(levels)
        ]

    def forward(self, x):
        return wt_conv(x, self.kernels)


class MswSa(Module):
    """Spatial attention gate attached to a feature map of known size."""

    def __init__(self, rng, height, width, cap=4, compress="sum", kernel=3, dtype=np.float32):
        super().__init__()
        self.height = height
        self.width = width
        self.compress = compress
        self.levels = levels_for_size(height, width, cap)
        in_ch = 1 if compress == "sum" else 2
        self.branches = [
            WaveletConvStack(rng, in_ch, lvl, kernel, dtype)
            for lvl in range(1, self.levels + 1)
        ]
        self.norms = [BatchNorm2d(in_ch, dtype=dtype) for _ in range(self.levels)]
        self.reduce = Conv2d(rng, in_ch, 1, kernel=1, bias=True, dtype=dtype)

    def attention_map(self, x, mode):
        """Per-position gate in (0, 1), shape (N, 1, H, W)."""
        compressed = channel_compress(x, self.compress)
        acc = None
        for branch, norm in zip(self.branches, self.norms):
            out = norm.forward(branch.forward(compressed), mode)
            acc = out if acc is None else acc + out
        return F.sigmoid(self.reduce.forward(acc))

    def forward(self, x, mode):
        """Residual reweighting: x + x * gate, broadcast across channels."""
        if x.data.shape[2] != self.height or x.data.shape[3] != self.width:
            raise ValueError(
                f"msw_sa: module built for {self.height}x{self.width}, "
                f"got {x.data.shape[2]}x{x.data.shape[3]}"
            )
        gate = self.attention_map(x, mode)
        return x + x * gate

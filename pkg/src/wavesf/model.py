"""Two-branch wavelet spatial-frequency classifier.

The input image is Haar-decomposed once. The approximation band feeds a
residual backbone with spatial attention between stages (the low branch);
the summed detail bands feed a chain of HFFC blocks (the high branch). Both
branches end in global average pooling and a projection; the projections are
concatenated and classified by a single linear layer.

Ablation switches: the wavelet front end can be replaced by a small learned
2x2/stride-2 stem (raw-image baseline with matched downsampling), the
attention modules and the whole high branch can be dropped, and the FFE
submodule inside HFFC supports its reduced variants.
"""

import struct
from dataclasses import dataclass

import numpy as np

from . import functional as F
from .attention import MswSa
from .hffc import FFE_VARIANTS, HffcBlock
from .modules import BatchNorm2d, Conv2d, Linear, Module
from .tensor import Tensor, concat
from .wavelet import WaveletSubbands, haar_dwt2d, highfreq_sum


@dataclass
class ModelConfig:
    input_size: int = 64
    in_channels: int = 1
    num_classes: int = 8
    stage_channels: tuple = (16, 32, 64, 128)
    stage_blocks: int = 2
    hffc_channels: tuple = (16, 32, 64, 128)
    msw_sa_cap: int = 4
    msw_sa_compress: str = "sum"
    d_lf: int = 128
    d_hf: int = 64
    leaky_alpha: float = 0.01
    ffe_kernel: int = 3
    ffe_groups: int = 4
    se_reduction: int = 4
    use_wavelet: bool = True
    use_msw_sa: bool = True
    use_hffc: bool = True
    ffe_variant: str = "full"
    normalize_fusion: bool = False  # L2-normalize each branch projection before concat

    def downsample_flags(self):
        # first stage keeps resolution, later stages halve it
        return tuple(i > 0 for i in range(len(self.stage_channels)))

    def validate(self):
        if self.input_size % 2:
            raise ValueError(f"input_size must be even, got {self.input_size}")
        n_down = sum(self.downsample_flags())
        need = 2 ** (1 + n_down)
        if self.input_size % need:
            raise ValueError(
                f"input_size {self.input_size} must be divisible by {need} "
                f"(one wavelet halving plus {n_down} stage downsamples)"
            )
        if not self.stage_channels:
            raise ValueError("need at least one backbone stage")
        if self.use_hffc:
            if not self.hffc_channels:
                raise ValueError("hffc enabled but hffc_channels is empty")
            chain = (self.in_channels,) + tuple(self.hffc_channels)
            for a, b in zip(chain, chain[1:]):
                if b < a:
                    raise ValueError(f"hffc channels must not shrink: {a} -> {b}")
            if (self.input_size // 2) % (2 ** len(self.hffc_channels)):
                raise ValueError(
                    f"high branch halves {len(self.hffc_channels)} times; "
                    f"input_size {self.input_size} is too small"
                )
        if self.ffe_variant not in FFE_VARIANTS:
            raise ValueError(f"ffe_variant must be one of {FFE_VARIANTS}")
        if self.msw_sa_compress not in ("sum", "concat"):
            raise ValueError("msw_sa_compress must be sum|concat")
        return self


class ResidualBlock(Module):
    def __init__(self, rng, in_ch, out_ch, stride, dtype=np.float32):
        super().__init__()
        self.conv1 = Conv2d(rng, in_ch, out_ch, 3, stride=stride, padding=1,
                            bias=False, dtype=dtype)
        self.bn1 = BatchNorm2d(out_ch, dtype=dtype)
        self.conv2 = Conv2d(rng, out_ch, out_ch, 3, padding=1, bias=False, dtype=dtype)
        self.bn2 = BatchNorm2d(out_ch, dtype=dtype)
        self.skip = None
        self.skip_norm = None
        if stride != 1 or in_ch != out_ch:
            self.skip = Conv2d(rng, in_ch, out_ch, 1, stride=stride, bias=False, dtype=dtype)
            self.skip_norm = BatchNorm2d(out_ch, dtype=dtype)

    def forward(self, x, mode):
        h = F.relu(self.bn1.forward(self.conv1.forward(x), mode))
        h = self.bn2.forward(self.conv2.forward(h), mode)
        shortcut = x if self.skip is None else self.skip_norm.forward(self.skip.forward(x), mode)
        return F.relu(h + shortcut)


class Stage(Module):
    def __init__(self, rng, in_ch, out_ch, blocks, downsample, dtype=np.float32):
        super().__init__()
        stride = 2 if downsample else 1
        self.blocks = [ResidualBlock(rng, in_ch, out_ch, stride, dtype)]
        for _ in range(blocks - 1):
            self.blocks.append(ResidualBlock(rng, out_ch, out_ch, 1, dtype))

    def forward(self, x, mode):
        for block in self.blocks:
            x = block.forward(x, mode)
        return x


class WaveSFNet(Module):
    def __init__(self, cfg: ModelConfig, rng, dtype=np.float32):
        super().__init__()
        cfg.validate()
        self.cfg = cfg

        if not cfg.use_wavelet:
            # learned stride-2 stem stands in for the wavelet halving
            self.stem = Conv2d(rng, cfg.in_channels, cfg.in_channels, 2, stride=2,
                               bias=True, dtype=dtype)

        size = cfg.input_size // 2
        self.stages = []
        self.attn = []
        in_ch = cfg.in_channels
        sizes_after = []
        for i, (out_ch, down) in enumerate(zip(cfg.stage_channels, cfg.downsample_flags())):
            self.stages.append(Stage(rng, in_ch, out_ch, cfg.stage_blocks, down, dtype))
            if down:
                size //= 2
            sizes_after.append(size)
            in_ch = out_ch
        if cfg.use_msw_sa:
            for i in range(len(self.stages) - 1):
                self.attn.append(
                    MswSa(rng, sizes_after[i], sizes_after[i], cfg.msw_sa_cap,
                          cfg.msw_sa_compress, dtype=dtype)
                )

        if cfg.use_hffc:
            self.hffc = []
            hin = cfg.in_channels
            for hout in cfg.hffc_channels:
                self.hffc.append(HffcBlock(rng, hin, hout, cfg.leaky_alpha, cfg.ffe_kernel,
                                           cfg.ffe_groups, cfg.se_reduction, dtype))
                hin = hout
            self.proj_high = Linear(rng, cfg.hffc_channels[-1], cfg.d_hf, dtype=dtype)

        self.proj_low = Linear(rng, cfg.stage_channels[-1], cfg.d_lf, dtype=dtype)
        fused = cfg.d_lf + (cfg.d_hf if cfg.use_hffc else 0)
        self.classifier = Linear(rng, fused, cfg.num_classes, dtype=dtype)

    # -- forward -----------------------------------------------------------
    def _flat_gap(self, x):
        pooled = F.global_avg_pool(x)
        n, c = pooled.data.shape[0], pooled.data.shape[1]
        return pooled.reshape(n, c)

    def _project(self, head, x):
        feat = head.forward(self._flat_gap(x))
        if self.cfg.normalize_fusion:
            norm = ((feat * feat).sum(axis=1, keepdims=True) + 1e-12) ** 0.5
            feat = feat / norm
        return feat

    def forward(self, images, mode, zero_details=False, return_features=False):
        cfg = self.cfg
        s = cfg.input_size
        if images.data.shape[2] != s or images.data.shape[3] != s:
            raise ValueError(
                f"model expects {s}x{s} input, got "
                f"{images.data.shape[2]}x{images.data.shape[3]}"
            )

        high_in = None
        if cfg.use_wavelet:
            bands = haar_dwt2d(images)
            if zero_details:
                zeros = lambda: Tensor(np.zeros_like(bands.lh.data))
                bands = WaveletSubbands(bands.ll, zeros(), zeros(), zeros())
            low = bands.ll
            if cfg.use_hffc:
                high_in = highfreq_sum(bands)
        else:
            low = self.stem.forward(images)

        for i, stage in enumerate(self.stages):
            low = stage.forward(low, mode)
            if cfg.use_msw_sa and i < len(self.stages) - 1:
                low = self.attn[i].forward(low, mode)
        low_feat = self._project(self.proj_low, low)

        if cfg.use_hffc:
            high = high_in
            for block in self.hffc:
                high = block.forward(high, mode, cfg.ffe_variant)
            high_feat = self._project(self.proj_high, high)
            fused = concat([low_feat, high_feat], axis=1)
        else:
            high_feat = None
            fused = low_feat

        logits = self.classifier.forward(fused)
        if return_features:
            return logits, {"low": low_feat, "high": high_feat, "fused": fused}
        return logits


def build_model(cfg: ModelConfig, seed, dtype=np.float32):
    """Deterministic construction: same (cfg, seed) gives bit-identical weights."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    model = WaveSFNet(cfg, rng, dtype)
    model.assign_names()
    return model


# -- checkpoint format -------------------------------------------------------
# magic "WNSF" | version u32 | entry count u32 | per entry:
#   name length u32 | UTF-8 name | dtype byte (0 = float32) | ndim byte |
#   dims u32 each | row-major little-endian payload
MAGIC = b"WNSF"
VERSION = 1


def save_checkpoint(source, path):
    """Serialize a model (or {name: array} mapping) to the binary format."""
    if isinstance(source, Module):
        items = [(n, (t if isinstance(t, np.ndarray) else t.data)) for n, t in source.named_tensors()]
    else:
        items = list(source.items())
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(items)))
        for name, arr in items:
            arr = np.ascontiguousarray(arr, dtype=np.float32)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<BB", 0, arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.astype("<f4", copy=False).tobytes())


class CheckpointError(ValueError):
    pass


def _take(blob, offset, count, what):
    if offset + count > len(blob):
        raise CheckpointError(f"truncated checkpoint: {what} at offset {offset}")
    return blob[offset : offset + count], offset + count


def load_checkpoint(path):
    """Parse the binary format back into an ordered {name: float32 array} dict."""
    with open(path, "rb") as fh:
        blob = fh.read()
    raw, off = _take(blob, 0, 4, "magic")
    if raw != MAGIC:
        raise CheckpointError("bad magic at offset 0")
    raw, off = _take(blob, off, 4, "version")
    version = struct.unpack("<I", raw)[0]
    if version != VERSION:
        raise CheckpointError(f"unsupported version {version} at offset 4")
    raw, off = _take(blob, off, 4, "entry count")
    count = struct.unpack("<I", raw)[0]
    out = {}
    for _ in range(count):
        raw, off = _take(blob, off, 4, "name length")
        name_len = struct.unpack("<I", raw)[0]
        raw, off = _take(blob, off, name_len, "name")
        name = raw.decode("utf-8")
        raw, off = _take(blob, off, 2, "dtype/ndim")
        dtype_code, ndim = raw[0], raw[1]
        if dtype_code != 0:
            raise CheckpointError(f"unknown dtype code {dtype_code} at offset {off - 2}")
        dims = []
        for _ in range(ndim):
            raw, off = _take(blob, off, 4, "dims")
            dims.append(struct.unpack("<I", raw)[0])
        nbytes = int(np.prod(dims, dtype=np.int64)) * 4 if dims else 4
        raw, off = _take(blob, off, nbytes, f"payload of {name}")
        out[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    if off != len(blob):
        raise CheckpointError(f"trailing bytes at offset {off}")
    return out

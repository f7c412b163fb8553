"""Flat ``key = value`` run configuration with typed defaults.

Unknown keys are rejected (typo guard). Lists are comma-separated, booleans
accept on/off/true/false/1/0. Every key has a documented default, so an empty
config is a valid desk-scale run.
"""

from dataclasses import dataclass

from .augment import AugmentConfig
from .model import ModelConfig
from .noise import DEFAULT_PSNR_LADDER
from .synth import SynthConfig
from .train import TrainConfig


def _bool(text):
    t = text.strip().lower()
    if t in ("on", "true", "1", "yes"):
        return True
    if t in ("off", "false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean (on/off), got {text!r}")


def _int_list(text):
    return tuple(int(p) for p in text.split(",") if p.strip())


def _float_list(text):
    return tuple(float(p) for p in text.split(",") if p.strip())


# key -> (parser, default)
SCHEMA = {
    "model.input_size": (int, 64),
    "model.in_channels": (int, 1),
    "model.num_classes": (int, 8),
    "model.stage_channels": (_int_list, (16, 32, 64, 128)),
    "model.stage_blocks": (int, 2),
    "model.hffc_channels": (_int_list, (16, 32, 64, 128)),
    "model.msw_sa_cap": (int, 4),
    "model.msw_sa_compress": (str, "sum"),
    "model.d_lf": (int, 128),
    "model.d_hf": (int, 64),
    "model.leaky_alpha": (float, 0.01),
    "model.ffe_kernel": (int, 3),
    "model.ffe_groups": (int, 4),
    "model.se_reduction": (int, 4),
    "model.normalize_fusion": (_bool, False),
    "train.lr_base": (float, 2e-4),
    "train.lr_min": (float, 2e-6),
    "train.weight_decay": (float, 1e-4),
    "train.beta1": (float, 0.9),
    "train.beta2": (float, 0.999),
    "train.batch_size": (int, 8),
    "train.epochs": (int, 60),
    "train.warmup_epochs": (int, 5),
    "train.seed": (int, 7),
    "train.stop_train_acc": (float, 0.0),
    "aug.rotation_deg": (float, 15.0),
    "aug.crop_scale_lo": (float, 0.8),
    "aug.crop_scale_hi": (float, 1.2),
    "aug.jitter": (float, 0.20),
    "aug.hflip_prob": (float, 0.5),
    "data.manifest": (str, ""),
    "data.train_frac": (float, 0.70),
    "data.val_frac": (float, 0.15),
    "data.synth_size": (int, 64),
    "data.synth_per_class": (int, 16),
    "data.seed": (int, 1234),
    "noise.psnr_ladder": (_float_list, DEFAULT_PSNR_LADDER),
    "noise.tol_db": (float, 0.1),
    "noise.seed": (int, 99),
    "ablation.wavelet_front_end": (_bool, True),
    "ablation.msw_sa": (_bool, True),
    "ablation.hffc": (_bool, True),
    "ablation.ffe": (str, "on"),  # on | off | no_selection | no_decomposition
}

_FFE_CHOICES = ("on", "off", "no_selection", "no_decomposition")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def model_config(self):
        v = self.values
        ffe = v["ablation.ffe"]
        return ModelConfig(
            input_size=v["model.input_size"],
            in_channels=v["model.in_channels"],
            num_classes=v["model.num_classes"],
            stage_channels=v["model.stage_channels"],
            stage_blocks=v["model.stage_blocks"],
            hffc_channels=v["model.hffc_channels"],
            msw_sa_cap=v["model.msw_sa_cap"],
            msw_sa_compress=v["model.msw_sa_compress"],
            d_lf=v["model.d_lf"],
            d_hf=v["model.d_hf"],
            leaky_alpha=v["model.leaky_alpha"],
            ffe_kernel=v["model.ffe_kernel"],
            ffe_groups=v["model.ffe_groups"],
            se_reduction=v["model.se_reduction"],
            normalize_fusion=v["model.normalize_fusion"],
            use_wavelet=v["ablation.wavelet_front_end"],
            use_msw_sa=v["ablation.msw_sa"],
            use_hffc=v["ablation.hffc"],
            ffe_variant="full" if ffe == "on" else ffe,
        ).validate()

    def train_config(self):
        v = self.values
        return TrainConfig(
            epochs=v["train.epochs"],
            batch_size=v["train.batch_size"],
            seed=v["train.seed"],
            base_lr=v["train.lr_base"],
            min_lr=v["train.lr_min"],
            warmup_epochs=v["train.warmup_epochs"],
            beta1=v["train.beta1"],
            beta2=v["train.beta2"],
            weight_decay=v["train.weight_decay"],
            stop_train_acc=v["train.stop_train_acc"],
        )

    def augment_config(self):
        v = self.values
        return AugmentConfig(
            rotation_deg=v["aug.rotation_deg"],
            crop_scale=(v["aug.crop_scale_lo"], v["aug.crop_scale_hi"]),
            jitter=v["aug.jitter"],
            hflip_prob=v["aug.hflip_prob"],
        ).validate()

    def synth_config(self):
        v = self.values
        return SynthConfig(
            size=v["data.synth_size"],
            per_class=v["data.synth_per_class"],
            seed=v["data.seed"],
            train_frac=v["data.train_frac"],
            val_frac=v["data.val_frac"],
        ).validate()


def parse_config_text(text, source="<config>"):
    values = {key: default for key, (_, default) in SCHEMA.items()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        parser, _ = SCHEMA[key]
        try:
            values[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    if values["ablation.ffe"] not in _FFE_CHOICES:
        raise ConfigError(f"ablation.ffe must be one of {_FFE_CHOICES}")
    return RunConfig(values)


def load_config(path=None):
    """Parse a config file; with no path, return the defaults."""
    if path is None:
        return parse_config_text("")
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=str(path))

import numpy as np
import pytest

from wavesf.model import ModelConfig
from wavesf.synth import SynthConfig, synth_generate


@pytest.fixture(scope="session")
def dataset(tmp_path_factory):
    """Small synthetic dataset shared by data/CLI/train tests (16 per class)."""
    root = tmp_path_factory.mktemp("synth16")
    return synth_generate(SynthConfig(per_class=16, seed=777), str(root))


def tiny_model_config(**overrides):
    """A fast desk-scale model for wiring tests (not the acceptance config)."""
    base = dict(
        input_size=32,
        stage_channels=(8, 16),
        stage_blocks=1,
        hffc_channels=(8, 16),
        d_lf=16,
        d_hf=8,
        ffe_groups=2,
        num_classes=8,
    )
    base.update(overrides)
    return ModelConfig(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

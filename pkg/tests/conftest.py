import numpy as np
import pytest

from mirnet.embedder import BackboneConfig
from mirnet.encoder import EncoderConfig
from mirnet.frontend import FeatureConfig
from mirnet.model import MirnetModel, ModelConfig


TINY_FEATURES = FeatureConfig(nfft=64, frame_ms=4.0, hop_ms=2.0)  # 33 bins

# matching run-config text for end-to-end command tests
TINY_RUN_CFG = """\
nfft = 64
frame_ms = 4
hop_ms = 2
segment_seconds = 0.25
encoder_scale = 64
backbone_widths = 4,8
backbone_blocks = 1
embed_dim = 8
epochs = 1
batch_size = 4
learning_rate = 0.001
seed = 3
synth_utterances = 6
synth_seconds = 0.45
synth_unseen_speakers = 4
synth_seed = 11
"""


def tiny_model_config(num_classes: int = 3, embed_dim: int = 8) -> ModelConfig:
    return ModelConfig(
        features=TINY_FEATURES,
        encoder=EncoderConfig.scaled(TINY_FEATURES.bins, 64),
        backbone=BackboneConfig(widths=(4, 8), blocks=1, embed_dim=embed_dim),
        num_classes=num_classes,
    )


@pytest.fixture
def tiny_model() -> MirnetModel:
    return MirnetModel(tiny_model_config(), seed=0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)

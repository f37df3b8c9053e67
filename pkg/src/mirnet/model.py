"""Full model assembly: encoder, shared attention, embedder, classifier."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import attention
from . import embedder
from . import encoder as _enc
from . import numerics as nx
from .frontend import FeatureConfig, Spectrogram, normalize_log_spectrogram


@dataclass(frozen=True)
class ModelConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    encoder: _enc.EncoderConfig | None = None  # derived from features when omitted
    backbone: embedder.BackboneConfig = field(default_factory=embedder.BackboneConfig)
    num_classes: int = 2

    def __post_init__(self):
        if self.encoder is None:
            # scaled(bins, 1) keeps the wide reference stack but pins the
            # last layer to 2*bins so the latent splits into two halves
            object.__setattr__(self, "encoder",
                               _enc.EncoderConfig.scaled(self.features.bins))
        if self.encoder.bins != self.features.bins:
            raise ValueError(
                f"encoder expects {self.encoder.bins} bins but features "
                f"produce {self.features.bins}"
            )


@dataclass
class ForwardResult:
    identity_1: nx.Tensor
    identity_2: nx.Tensor
    logits_1: nx.Tensor
    logits_2: nx.Tensor
    weights_1: nx.Tensor
    weights_2: nx.Tensor


class MirnetModel:
    """Two identity embeddings and two logit vectors from one mixture."""

    def __init__(self, config: ModelConfig, params: nx.ParameterStore | None = None,
                 seed: int = 0):
        self.config = config
        if params is None:
            params = nx.ParameterStore()
            rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
            _enc.init_encoder(rng, config.encoder, params)
            attention.init_attention(rng, config.encoder.latent_channels,
                                     config.encoder.bins, params)
            embedder.init_backbone(rng, config.backbone, params)
            embedder.init_classifier(rng, config.backbone.embed_dim,
                                     config.num_classes, params)
        self.params = params

    def encode(self, spec: Spectrogram) -> nx.Tensor:
        normed = normalize_log_spectrogram(spec)
        return _enc.encode(nx.Tensor(normed.values), self.params, self.config.encoder)

    def forward_from_latent(self, latent: nx.Tensor) -> ForwardResult:
        alpha = self.config.encoder.alpha
        w1, z1, w2, z2 = attention.attend_mixture(latent, self.params, alpha)
        i1 = embedder.embed(z1, self.params, self.config.backbone)
        i2 = embedder.embed(z2, self.params, self.config.backbone)
        y1 = embedder.classify(i1, self.params)
        y2 = embedder.classify(i2, self.params)
        return ForwardResult(i1, i2, y1, y2, w1, w2)

    def forward_mixture(self, spec: Spectrogram) -> ForwardResult:
        return self.forward_from_latent(self.encode(spec))

    def identity_pair(self, spec: Spectrogram) -> tuple[np.ndarray, np.ndarray]:
        """Forward without recording; returns the two embedding vectors."""
        with nx.no_grad():
            out = self.forward_mixture(spec)
        return out.identity_1.data, out.identity_2.data

"""Identity embedder: residual 2-D backbone over the attended map.

The attended [bins, frames] output is treated as a one-channel image.  Each
stage opens with a plain 3x3 convolution (stride 2 from the second stage on)
followed by identity-shortcut residual blocks; all activations are
LeakyReLU(0.2).  Frequencies are averaged out, frames are averaged out
(temporal average pooling), and an affine head maps to the embedding.  A
separate affine classifier turns embeddings into per-speaker logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx

REDUCED_WIDTHS = (16, 32, 64, 128)
FAITHFUL_WIDTHS = (64, 128, 256, 512)


@dataclass(frozen=True)
class BackboneConfig:
    widths: tuple[int, ...] = REDUCED_WIDTHS
    blocks: int = 1
    embed_dim: int = 256
    alpha: float = 0.2

    def __post_init__(self):
        if not self.widths or any(w < 1 for w in self.widths):
            raise ValueError(f"stage widths must be positive: {self.widths}")
        if self.blocks < 0:
            raise ValueError(f"blocks must be >= 0, got {self.blocks}")
        if self.embed_dim < 1:
            raise ValueError(f"embed_dim must be positive, got {self.embed_dim}")

    @property
    def min_frames(self) -> int:
        # one stride-2 entry per stage after the first
        return 2 ** (len(self.widths) - 1)

    @classmethod
    def faithful(cls, embed_dim: int = 256) -> "BackboneConfig":
        return cls(widths=FAITHFUL_WIDTHS, blocks=2, embed_dim=embed_dim)


def _conv_bound(c_in: int, kh: int = 3, kw: int = 3) -> float:
    return float(np.sqrt(1.0 / (c_in * kh * kw)))


def init_backbone(rng: np.random.Generator, config: BackboneConfig,
                  store: nx.ParameterStore, prefix: str = "emb") -> None:
    c_in = 1
    for si, width in enumerate(config.widths, start=1):
        b = _conv_bound(c_in)
        store.add(f"{prefix}.s{si}.entry.w", rng.uniform(-b, b, (width, c_in, 3, 3)))
        store.add(f"{prefix}.s{si}.entry.b", np.zeros(width))
        b = _conv_bound(width)
        for bi in range(1, config.blocks + 1):
            store.add(f"{prefix}.s{si}.block{bi}.conv1.w",
                      rng.uniform(-b, b, (width, width, 3, 3)))
            store.add(f"{prefix}.s{si}.block{bi}.conv1.b", np.zeros(width))
            store.add(f"{prefix}.s{si}.block{bi}.conv2.w",
                      rng.uniform(-b, b, (width, width, 3, 3)))
            store.add(f"{prefix}.s{si}.block{bi}.conv2.b", np.zeros(width))
        c_in = width
    bound = np.sqrt(1.0 / config.widths[-1])
    store.add(f"{prefix}.head.w",
              rng.uniform(-bound, bound, (config.widths[-1], config.embed_dim)))
    store.add(f"{prefix}.head.b", np.zeros(config.embed_dim))


def init_classifier(rng: np.random.Generator, embed_dim: int, classes: int,
                    store: nx.ParameterStore, prefix: str = "cls") -> None:
    if classes < 2:
        raise ValueError(f"need at least 2 classes, got {classes}")
    bound = np.sqrt(1.0 / embed_dim)
    store.add(f"{prefix}.w", rng.uniform(-bound, bound, (embed_dim, classes)))
    store.add(f"{prefix}.b", np.zeros(classes))


def embed(z, params: nx.ParameterStore, config: BackboneConfig,
          prefix: str = "emb") -> nx.Tensor:
    """Map an attended [bins, frames] tensor to an [embed_dim] embedding."""
    t = z if isinstance(z, nx.Tensor) else nx.Tensor(z)
    if t.data.ndim != 2:
        raise ValueError(f"embed expects [bins, frames], got shape {t.data.shape}")
    frames = t.data.shape[1]
    if frames < config.min_frames:
        raise ValueError(
            f"{frames} frames cannot survive {len(config.widths) - 1} stride-2 "
            f"stages; need at least {config.min_frames}"
        )
    x = nx.reshape(t, (1, t.data.shape[0], frames))
    for si, _ in enumerate(config.widths, start=1):
        stride = 1 if si == 1 else 2
        x = nx.leaky_relu(
            nx.conv2d(x, params[f"{prefix}.s{si}.entry.w"].tensor,
                      params[f"{prefix}.s{si}.entry.b"].tensor, stride=stride),
            config.alpha)
        for bi in range(1, config.blocks + 1):
            h = nx.leaky_relu(
                nx.conv2d(x, params[f"{prefix}.s{si}.block{bi}.conv1.w"].tensor,
                          params[f"{prefix}.s{si}.block{bi}.conv1.b"].tensor),
                config.alpha)
            h = nx.conv2d(h, params[f"{prefix}.s{si}.block{bi}.conv2.w"].tensor,
                          params[f"{prefix}.s{si}.block{bi}.conv2.b"].tensor)
            x = nx.leaky_relu(nx.add(x, h), config.alpha)
    pooled = nx.mean_over_time(nx.mean_axis(x, 1))  # frequency mean, then TAP
    return nx.affine(pooled, params[f"{prefix}.head.w"].tensor,
                     params[f"{prefix}.head.b"].tensor)


def classify(embedding: nx.Tensor, params: nx.ParameterStore,
             prefix: str = "cls") -> nx.Tensor:
    return nx.affine(embedding, params[f"{prefix}.w"].tensor,
                     params[f"{prefix}.b"].tensor)

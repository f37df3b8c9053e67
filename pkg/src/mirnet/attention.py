"""Spectral attention over the encoder latent.

The latent of a two-speaker mixture is split into halves; swapping the halves
(`channel_flip`) yields the second branch's view.  One shared scorer (affine
to 64, tanh, affine to 1, sigmoid) produces a scalar weight per frame, the
weighted latent is projected back to the bin count, and a LeakyReLU follows.
Because the scorer and projection are shared and the frame weights are
scalars, running the pipeline on a flipped latent equals flipping nothing but
the input: branch two is branch one applied to the flipped latent.
"""

from __future__ import annotations

import numpy as np

from . import numerics as nx

SCORER_HIDDEN = 64


def channel_flip(v) -> nx.Tensor:
    """Swap the two channel halves: rows [D:2D] then [0:D]."""
    t = v if isinstance(v, nx.Tensor) else nx.Tensor(v)
    c = t.data.shape[0]
    if t.data.ndim != 2:
        raise ValueError(f"channel_flip expects [channels, frames], got {t.data.shape}")
    if c % 2 != 0:
        raise ValueError(f"channel_flip requires an even channel count, got {c}")
    d = c // 2
    idx = np.concatenate([np.arange(d, c), np.arange(0, d)])
    return nx.gather_rows(t, idx)


def init_attention(rng: np.random.Generator, latent_channels: int, bins: int,
                   store: nx.ParameterStore, prefix: str = "att") -> None:
    """Scorer (C -> 64 -> 1) and projection (C -> bins); both branch-shared."""
    b1 = np.sqrt(1.0 / latent_channels)
    store.add(f"{prefix}.fc1.w", rng.uniform(-b1, b1, (latent_channels, SCORER_HIDDEN)))
    store.add(f"{prefix}.fc1.b", np.zeros(SCORER_HIDDEN))
    b2 = np.sqrt(1.0 / SCORER_HIDDEN)
    store.add(f"{prefix}.fc2.w", rng.uniform(-b2, b2, (SCORER_HIDDEN, 1)))
    store.add(f"{prefix}.fc2.b", np.zeros(1))
    store.add(f"{prefix}.proj.w", rng.uniform(-b1, b1, (latent_channels, bins)))
    store.add(f"{prefix}.proj.b", np.zeros(bins))


def attention_scores(v: nx.Tensor, params: nx.ParameterStore,
                     prefix: str = "att") -> nx.Tensor:
    """One sigmoid weight per frame, shape [frames], each strictly in (0, 1)."""
    h = nx.transpose2d(v)  # [T, C]
    h = nx.tanh(nx.affine(h, params[f"{prefix}.fc1.w"].tensor,
                          params[f"{prefix}.fc1.b"].tensor))
    s = nx.affine(h, params[f"{prefix}.fc2.w"].tensor,
                  params[f"{prefix}.fc2.b"].tensor)  # [T, 1]
    return nx.sigmoid(nx.reshape(s, (s.data.shape[0],)))


def attend_project(v: nx.Tensor, weights: nx.Tensor, params: nx.ParameterStore,
                   alpha: float = 0.2, prefix: str = "att") -> nx.Tensor:
    """Scale each frame of v by its weight, project channels to bins, LeakyReLU."""
    if weights.data.ndim != 1 or weights.data.shape[0] != v.data.shape[1]:
        raise ValueError(
            f"need one weight per frame: weights {weights.data.shape}, "
            f"latent {v.data.shape}"
        )
    weighted = nx.mul(v, nx.reshape(weights, (1, weights.data.shape[0])))
    h = nx.affine(nx.transpose2d(weighted), params[f"{prefix}.proj.w"].tensor,
                  params[f"{prefix}.proj.b"].tensor)  # [T, bins]
    return nx.transpose2d(nx.leaky_relu(h, alpha))


def attend_mixture(v: nx.Tensor, params: nx.ParameterStore, alpha: float = 0.2,
                   prefix: str = "att"):
    """Both branches: (weights_1, attended_1, weights_2, attended_2).

    Branch two is literally branch one on the flipped latent, which is what
    makes swapping the halves swap the outputs bit for bit.
    """
    w1 = attention_scores(v, params, prefix)
    z1 = attend_project(v, w1, params, alpha, prefix)
    v2 = channel_flip(v)
    w2 = attention_scores(v2, params, prefix)
    z2 = attend_project(v2, w2, params, alpha, prefix)
    return w1, z1, w2, z2


def export_attention(weights, path) -> None:
    """Write one weight per line; repr round-trips float64 exactly."""
    arr = weights.data if isinstance(weights, nx.Tensor) else np.asarray(weights)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D weight vector, got shape {arr.shape}")
    with open(path, "w", encoding="utf-8") as f:
        for v in arr:
            f.write(f"{float(v)!r}\n")

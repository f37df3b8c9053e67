"""Speech analysis encoder: a stack of six same-padded 1-D convolutions.

The faithful layout is channels (512, 512, 512, 512, 1500, 514) with kernels
(5, 3, 3, 1, 1, 1); every layer is followed by LeakyReLU(0.2).  The final
channel count is twice the number of frequency bins so the latent splits into
two equal halves downstream.  A `scale` divisor shrinks the four 512 layers
and the 1500 layer for desk-sized runs while keeping the last layer tied to
the bin count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx

FAITHFUL_CHANNELS = (512, 512, 512, 512, 1500, 514)
KERNELS = (5, 3, 3, 1, 1, 1)


@dataclass(frozen=True)
class EncoderConfig:
    bins: int = 257
    channels: tuple[int, ...] = FAITHFUL_CHANNELS
    kernels: tuple[int, ...] = KERNELS
    alpha: float = 0.2

    def __post_init__(self):
        if len(self.channels) != len(self.kernels):
            raise ValueError(
                f"{len(self.channels)} channel counts vs {len(self.kernels)} kernels"
            )
        if any(c < 1 for c in self.channels):
            raise ValueError(f"channel counts must be positive: {self.channels}")
        if any(k < 1 or k % 2 == 0 for k in self.kernels):
            raise ValueError(f"kernels must be positive odd integers: {self.kernels}")
        if self.channels[-1] % 2 != 0:
            raise ValueError(
                f"final channel count must be even so the latent can split into "
                f"two halves, got {self.channels[-1]}"
            )

    @property
    def latent_channels(self) -> int:
        return self.channels[-1]

    @classmethod
    def scaled(cls, bins: int = 257, scale: int = 1, alpha: float = 0.2) -> "EncoderConfig":
        """Divide the wide layers by `scale`; the last layer stays at 2*bins."""
        if scale < 1:
            raise ValueError(f"scale must be >= 1, got {scale}")
        base = [max(1, c // scale) for c in FAITHFUL_CHANNELS[:-1]]
        return cls(bins=bins, channels=(*base, 2 * bins), kernels=KERNELS, alpha=alpha)


def init_encoder(rng: np.random.Generator, config: EncoderConfig,
                 store: nx.ParameterStore, prefix: str = "enc") -> None:
    """Uniform(-a, a) weights with a = sqrt(1 / (fan_in * K)); zero biases."""
    c_in = config.bins
    for i, (c_out, k) in enumerate(zip(config.channels, config.kernels), start=1):
        bound = np.sqrt(1.0 / (c_in * k))
        store.add(f"{prefix}.conv{i}.w", rng.uniform(-bound, bound, (c_out, c_in, k)))
        store.add(f"{prefix}.conv{i}.b", np.zeros(c_out))
        c_in = c_out


def encode(x, params: nx.ParameterStore, config: EncoderConfig,
           prefix: str = "enc") -> nx.Tensor:
    """Map [bins, frames] features to the [2*bins, frames] latent."""
    h = x if isinstance(x, nx.Tensor) else nx.Tensor(x)
    if h.data.ndim != 2 or h.data.shape[0] != config.bins:
        raise ValueError(
            f"encoder expects [{config.bins}, frames] input, got {h.data.shape}"
        )
    for i in range(1, len(config.channels) + 1):
        h = nx.conv1d(h, params[f"{prefix}.conv{i}.w"].tensor,
                      params[f"{prefix}.conv{i}.b"].tensor)
        h = nx.leaky_relu(h, config.alpha)
    return h

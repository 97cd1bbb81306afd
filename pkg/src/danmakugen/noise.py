"""Global + periodic noise input shared by the sequential generators.

A 16-dim global draw is duplicated along the spatial axis and concatenated
with a position-indexed sinusoid whose frequency and phase come from two
small trainable perceptrons applied to the global draw.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tensor

GLOBAL_DIM = 16
PERIODIC_DIM = 16
NOISE_DIM = GLOBAL_DIM + PERIODIC_DIM
MLP_HIDDEN = 32


class NoiseSpec(nn.Module):
    """Holds the spatial length and the trainable frequency/phase perceptrons."""

    def __init__(self, rng: np.random.Generator, spatial_len: int):
        super().__init__()
        self.spatial_len = spatial_len
        self.k1_in = self._adopt("k1_in", nn.Affine(rng, GLOBAL_DIM, MLP_HIDDEN))
        self.k1_out = self._adopt("k1_out", nn.Affine(rng, MLP_HIDDEN, PERIODIC_DIM))
        self.k2_in = self._adopt("k2_in", nn.Affine(rng, GLOBAL_DIM, MLP_HIDDEN))
        self.k2_out = self._adopt("k2_out", nn.Affine(rng, MLP_HIDDEN, PERIODIC_DIM))
        # positions are 1-based along the spatial axis
        self._positions = Tensor(np.arange(1, spatial_len + 1, dtype=np.float64).reshape(1, spatial_len, 1))

    def frequency(self, z_global: Tensor) -> Tensor:
        return self.k1_out(ad.relu(self.k1_in(z_global)))

    def phase(self, z_global: Tensor) -> Tensor:
        return self.k2_out(ad.relu(self.k2_in(z_global)))

    def expand(self, z_global: Tensor) -> Tensor:
        """(batch, 16) global draws -> (batch, T_Z, 32) noise rows."""
        batch = z_global.values.shape[0]
        k1 = ad.reshape(self.frequency(z_global), (batch, 1, PERIODIC_DIM))
        k2 = ad.reshape(self.phase(z_global), (batch, 1, PERIODIC_DIM))
        periodic = ad.sin(ad.add(ad.mul(self._positions, k1), k2))
        tiled = ad.mul(ad.reshape(z_global, (batch, 1, GLOBAL_DIM)),
                       Tensor(np.ones((1, self.spatial_len, 1))))
        return ad.concat([tiled, periodic], axis=2)

    def sample(self, rng: np.random.Generator, batch: int = 1) -> Tensor:
        z_global = Tensor(rng.standard_normal((batch, GLOBAL_DIM)))
        return self.expand(z_global)


def make_noise(spec: NoiseSpec, rng: np.random.Generator) -> Tensor:
    """Single noise block of shape (T_Z, 32); the global half of every row is
    the same draw, the periodic half is sin(i * K1(z) + K2(z))."""
    out = spec.sample(rng, batch=1)
    return ad.reshape(out, (spec.spatial_len, NOISE_DIM))

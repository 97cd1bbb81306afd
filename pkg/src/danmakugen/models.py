"""The three generator/discriminator architectures.

Layer geometry is pinned: the convolutional generators end on a logistic head
so every output feature lies in (0, 1) and decodes without clamping; the
discriminators mirror their generators with ReLU between layers and a
logistic final score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import codec, nn
from .autodiff import Tensor
from .noise import NOISE_DIM, NoiseSpec

ARCHITECTURES = ("dcgan", "psgan", "timegan")


@dataclass(frozen=True)
class DcganConfig:
    latent_dim: int = 100
    channels: tuple[int, ...] = (100, 256, 128, 64, 32, 8)
    kernel: int = 4
    # (stride, padding) per layer: first expands 1 -> 4, the rest double
    steps: tuple[tuple[int, int], ...] = ((1, 0), (2, 1), (2, 1), (2, 1), (2, 1))
    seq_len: int = codec.SEQUENCE_LENGTH
    features: int = codec.FEATURE_DIM


@dataclass(frozen=True)
class PsganConfig:
    spatial_len: int = 10
    channels: tuple[int, ...] = (NOISE_DIM, 128, 64, 32, 8)
    kernel: int = 4
    strides: tuple[int, ...] = (1, 2, 1, 2)
    seq_len: int = codec.SEQUENCE_LENGTH
    features: int = codec.FEATURE_DIM


@dataclass(frozen=True)
class TimeganConfig:
    features: int = codec.FEATURE_DIM
    latent_dim: int = 24
    hidden: int = 128
    layers: int = 3
    seq_len: int = codec.SEQUENCE_LENGTH
    noise_len: int = codec.SEQUENCE_LENGTH  # one noise row per generated step


def _audit_chain(lengths: list[int], expected: list[int], label: str) -> None:
    if lengths != expected:
        raise ValueError(f"{label} length chain {lengths} != expected {expected}")


class DcganGenerator(nn.Module):
    def __init__(self, rng: np.random.Generator, config: DcganConfig = DcganConfig()):
        super().__init__()
        self.config = config
        self.layers: list[nn.ConvTranspose1d] = []
        lengths = [1]
        for i, (stride, padding) in enumerate(config.steps):
            layer = nn.ConvTranspose1d(rng, config.channels[i], config.channels[i + 1],
                                       config.kernel, stride, padding)
            self.layers.append(self._adopt(f"l{i}", layer))
            lengths.append(ad.conv1d_transpose_out_length(lengths[-1], config.kernel, stride, padding))
        _audit_chain(lengths, [1, 4, 8, 16, 32, 64], "dcgan generator")

    def __call__(self, z: Tensor) -> Tensor:
        """(batch, latent, 1) -> (batch, 64, 8) in (0, 1)."""
        if z.values.ndim != 3 or z.values.shape[1:] != (self.config.latent_dim, 1):
            raise ValueError(
                f"dcgan latent must be (batch, {self.config.latent_dim}, 1), got {z.values.shape}"
            )
        h = z
        for layer in self.layers[:-1]:
            h = ad.relu(layer(h))
        h = ad.sigmoid(self.layers[-1](h))
        return ad.transpose(h, (0, 2, 1))

    def sample_latent(self, rng: np.random.Generator, batch: int) -> Tensor:
        return Tensor(rng.standard_normal((batch, self.config.latent_dim, 1)))


class DcganDiscriminator(nn.Module):
    def __init__(self, rng: np.random.Generator, config: DcganConfig = DcganConfig()):
        super().__init__()
        self.config = config
        channels = tuple(reversed(config.channels[1:])) + (1,)  # 8 -> 32 -> ... -> 256 -> 1
        steps = tuple(reversed(config.steps))
        self.layers = []
        lengths = [config.seq_len]
        for i, (stride, padding) in enumerate(steps):
            layer = nn.Conv1d(rng, channels[i], channels[i + 1], config.kernel, stride, padding)
            self.layers.append(self._adopt(f"l{i}", layer))
            lengths.append(ad.conv1d_out_length(lengths[-1], config.kernel, stride, padding))
        _audit_chain(lengths, [64, 32, 16, 8, 4, 1], "dcgan discriminator")

    def __call__(self, seq: Tensor) -> Tensor:
        """(batch, 64, 8) -> (batch,) scores in (0, 1)."""
        h = ad.transpose(seq, (0, 2, 1))
        for layer in self.layers[:-1]:
            h = ad.relu(layer(h))
        h = ad.sigmoid(self.layers[-1](h))
        return ad.reshape(h, (h.values.shape[0],))


class PsganGenerator(nn.Module):
    def __init__(self, rng: np.random.Generator, config: PsganConfig = PsganConfig()):
        super().__init__()
        self.config = config
        self.noise = self._adopt("noise", NoiseSpec(rng, config.spatial_len))
        self.layers = []
        lengths = [config.spatial_len]
        for i, stride in enumerate(config.strides):
            layer = nn.ConvTranspose1d(rng, config.channels[i], config.channels[i + 1],
                                       config.kernel, stride, padding=0)
            self.layers.append(self._adopt(f"l{i}", layer))
            lengths.append(ad.conv1d_transpose_out_length(lengths[-1], config.kernel, stride, 0))
        _audit_chain(lengths, [10, 13, 28, 31, 64], "psgan generator")

    def __call__(self, noise_block: Tensor) -> Tensor:
        """(batch, T_Z, 32) noise -> (batch, 64, 8) in (0, 1)."""
        shape = noise_block.values.shape
        if len(shape) != 3 or shape[2] != NOISE_DIM:
            raise ValueError(f"psgan noise must be (batch, T_Z, {NOISE_DIM}), got {shape}")
        if shape[1] != self.config.spatial_len:
            raise ValueError(
                f"psgan noise spatial length {shape[1]} != {self.config.spatial_len}; "
                f"the sequence contract pins the output length to {self.config.seq_len}"
            )
        h = ad.transpose(noise_block, (0, 2, 1))
        for layer in self.layers[:-1]:
            h = ad.relu(layer(h))
        h = ad.sigmoid(self.layers[-1](h))
        return ad.transpose(h, (0, 2, 1))


class PsganDiscriminator(nn.Module):
    def __init__(self, rng: np.random.Generator, config: PsganConfig = PsganConfig()):
        super().__init__()
        self.config = config
        channels = tuple(reversed(config.channels[1:])) + (1,)  # 8 -> 32 -> 64 -> 128 -> 1
        strides = tuple(reversed(config.strides))
        self.layers = []
        lengths = [config.seq_len]
        for i, stride in enumerate(strides):
            layer = nn.Conv1d(rng, channels[i], channels[i + 1], config.kernel, stride, padding=0)
            self.layers.append(self._adopt(f"l{i}", layer))
            lengths.append(ad.conv1d_out_length(lengths[-1], config.kernel, stride, 0))
        _audit_chain(lengths, [64, 31, 28, 13, 10], "psgan discriminator")

    def __call__(self, seq: Tensor) -> Tensor:
        """(batch, 64, 8) -> (batch,) mean of the per-position scores."""
        h = ad.transpose(seq, (0, 2, 1))
        for layer in self.layers[:-1]:
            h = ad.relu(layer(h))
        h = ad.sigmoid(self.layers[-1](h))  # (batch, 1, positions)
        return ad.reshape(ad.mean(h, axis=2), (h.values.shape[0],))


class SequenceNet(nn.Module):
    """Stacked LSTM with an affine logistic head, over (batch, time, features)."""

    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int, config: TimeganConfig):
        super().__init__()
        self.lstm = self._adopt("lstm", nn.LSTM(rng, d_in, config.hidden, config.layers))
        self.head = self._adopt("head", nn.Affine(rng, config.hidden, d_out))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.sigmoid(self.head(self.lstm(x)))


class Dcgan(nn.Module):
    arch = "dcgan"

    def __init__(self, rng: np.random.Generator, config: DcganConfig = DcganConfig()):
        super().__init__()
        self.config = config
        self.generator = self._adopt("generator", DcganGenerator(rng, config))
        self.discriminator = self._adopt("discriminator", DcganDiscriminator(rng, config))

    def sample_sequences(self, rng: np.random.Generator, count: int) -> np.ndarray:
        with ad.no_grad():
            return self.generator(self.generator.sample_latent(rng, count)).values


class Psgan(nn.Module):
    arch = "psgan"

    def __init__(self, rng: np.random.Generator, config: PsganConfig = PsganConfig()):
        super().__init__()
        self.config = config
        self.generator = self._adopt("generator", PsganGenerator(rng, config))
        self.discriminator = self._adopt("discriminator", PsganDiscriminator(rng, config))

    def sample_sequences(self, rng: np.random.Generator, count: int) -> np.ndarray:
        with ad.no_grad():
            return self.generator(self.generator.noise.sample(rng, count)).values


class Timegan(nn.Module):
    """Embedder/reconstructor autoencoder, generator, supervisor and a
    latent-space discriminator, all on a shared 24-dim hidden space."""

    arch = "timegan"

    def __init__(self, rng: np.random.Generator, config: TimeganConfig = TimeganConfig()):
        super().__init__()
        self.config = config
        self.noise = self._adopt("noise", NoiseSpec(rng, config.noise_len))
        self.embedder = self._adopt("embedder", SequenceNet(rng, config.features, config.latent_dim, config))
        self.reconstructor = self._adopt("reconstructor",
                                         SequenceNet(rng, config.latent_dim, config.features, config))
        self.generator = self._adopt("generator", SequenceNet(rng, NOISE_DIM, config.latent_dim, config))
        self.supervisor = self._adopt("supervisor",
                                      SequenceNet(rng, config.latent_dim, config.latent_dim, config))
        self.discriminator = self._adopt("discriminator", SequenceNet(rng, config.latent_dim, 1, config))

    def generate_latents(self, noise_block: Tensor) -> Tensor:
        return self.supervisor(self.generator(noise_block))

    def sample_sequences(self, rng: np.random.Generator, count: int) -> np.ndarray:
        with ad.no_grad():
            latents = self.generate_latents(self.noise.sample(rng, count))
            return self.reconstructor(latents).values


def build_model(arch: str, rng: np.random.Generator):
    if arch == "dcgan":
        return Dcgan(rng)
    if arch == "psgan":
        return Psgan(rng)
    if arch == "timegan":
        return Timegan(rng)
    raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")


def discriminate(model, seq) -> np.ndarray:
    """Score sequences (or latent sequences for the timegan) with frozen weights."""
    x = seq if isinstance(seq, Tensor) else Tensor(np.asarray(seq, dtype=np.float64))
    with ad.no_grad():
        return model.discriminator(x).values

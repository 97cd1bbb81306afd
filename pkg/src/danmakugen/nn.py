"""Network layers assembled from autodiff ops: affine, 1-d convolutions, stacked LSTM."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def conv_init(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    return rng.normal(0.0, std, size=shape)


def fan_in_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """Named-parameter container; subclasses register (name, Tensor) pairs."""

    def __init__(self):
        self._params: list[tuple[str, Tensor]] = []

    def _register(self, name: str, values: np.ndarray) -> Tensor:
        t = Tensor(values, requires_grad=True)
        self._params.append((name, t))
        return t

    def _adopt(self, name: str, child: "Module") -> "Module":
        for pname, p in child._params:
            self._params.append((f"{name}.{pname}", p))
        return child

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return list(self._params)

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self._params]

    def zero_grad(self) -> None:
        for _, p in self._params:
            p.zero_grad()

    def param_count(self) -> int:
        return sum(p.size for _, p in self._params)

    def load_values(self, named_values: dict[str, np.ndarray]) -> None:
        for name, p in self._params:
            v = named_values[name]
            if v.shape != p.values.shape:
                raise ValueError(f"parameter {name}: stored shape {v.shape} != model shape {p.values.shape}")
            p.values = v.astype(np.float64)


class Affine(Module):
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int):
        super().__init__()
        self.w = self._register("w", fan_in_init(rng, (d_in, d_out), d_in))
        self.b = self._register("b", np.zeros(d_out))

    def __call__(self, x: Tensor) -> Tensor:
        if x.values.ndim == 2:
            return ad.add(ad.matmul(x, self.w), self.b)
        # (B, T, D): fold batch and time for the matmul
        b, t, d = x.values.shape
        flat = ad.reshape(x, (b * t, d))
        out = ad.add(ad.matmul(flat, self.w), self.b)
        return ad.reshape(out, (b, t, self.w.values.shape[1]))


class Conv1d(Module):
    def __init__(self, rng: np.random.Generator, c_in: int, c_out: int, kernel: int,
                 stride: int = 1, padding: int = 0):
        super().__init__()
        self.stride = stride
        self.padding = padding
        self.w = self._register("w", conv_init(rng, (c_out, c_in, kernel)))
        self.b = self._register("b", np.zeros(c_out))

    def __call__(self, x: Tensor) -> Tensor:
        out = ad.conv1d(x, self.w, self.stride, self.padding)
        return ad.add(out, ad.reshape(self.b, (1, -1, 1)))


class ConvTranspose1d(Module):
    def __init__(self, rng: np.random.Generator, c_in: int, c_out: int, kernel: int,
                 stride: int = 1, padding: int = 0):
        super().__init__()
        self.stride = stride
        self.padding = padding
        self.w = self._register("w", conv_init(rng, (c_in, c_out, kernel)))
        self.b = self._register("b", np.zeros(c_out))

    def __call__(self, x: Tensor) -> Tensor:
        out = ad.conv1d_transpose(x, self.w, self.stride, self.padding)
        return ad.add(out, ad.reshape(self.b, (1, -1, 1)))


class LSTM(Module):
    """Stacked LSTM over (batch, time, features); zero initial states.

    Gate order in the fused weight matrices is input, forget, candidate, output.
    """

    def __init__(self, rng: np.random.Generator, d_in: int, hidden: int, layers: int):
        super().__init__()
        self.hidden = hidden
        self.layers = layers
        self.cells: list[tuple[Tensor, Tensor, Tensor]] = []
        for layer in range(layers):
            d = d_in if layer == 0 else hidden
            wx = self._register(f"l{layer}.wx", fan_in_init(rng, (d, 4 * hidden), d))
            wh = self._register(f"l{layer}.wh", fan_in_init(rng, (hidden, 4 * hidden), hidden))
            b = self._register(f"l{layer}.b", np.zeros(4 * hidden))
            self.cells.append((wx, wh, b))

    def __call__(self, x: Tensor) -> Tensor:
        out = x
        for wx, wh, b in self.cells:
            out = ad.lstm_layer(out, wx, wh, b)
        return out


def lstm_forward(seq: Tensor, stack: LSTM) -> Tensor:
    """Single-sequence (time, features) -> (time, hidden) through a stacked LSTM."""
    steps, d = seq.values.shape
    out = stack(ad.reshape(seq, (1, steps, d)))
    return ad.reshape(out, (steps, stack.hidden))

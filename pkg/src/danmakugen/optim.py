"""Adam and RMSprop over named parameter lists, with NaN-gradient diagnostics."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class GradientError(RuntimeError):
    pass


def _check_grad(name: str, param: Tensor) -> np.ndarray:
    if param.grad is None:
        raise GradientError(f"parameter {name} has no gradient; run backward first")
    if not np.all(np.isfinite(param.grad)):
        raise GradientError(f"non-finite gradient in parameter {name}")
    return param.grad


class Adam:
    """Adam with bias correction; update = lr * m_hat / (sqrt(v_hat) + eps)."""

    kind = "adam"

    def __init__(self, named_params, lr: float, beta1: float = 0.5, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = list(named_params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.first_moment = [np.zeros_like(p.values) for _, p in self.params]
        self.second_moment = [np.zeros_like(p.values) for _, p in self.params]

    def step(self) -> None:
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.step_count
        bc2 = 1.0 - b2 ** self.step_count
        for i, (name, p) in enumerate(self.params):
            g = _check_grad(name, p)
            m = self.first_moment[i]
            v = self.second_moment[i]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.values = p.values - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.zero_grad()


class RMSprop:
    """RMSprop with a running mean square; update = lr * g / (sqrt(v) + eps)."""

    kind = "rmsprop"

    def __init__(self, named_params, lr: float, decay: float = 0.9, eps: float = 1e-8):
        self.params = list(named_params)
        self.lr = lr
        self.decay = decay
        self.eps = eps
        self.step_count = 0
        self.second_moment = [np.zeros_like(p.values) for _, p in self.params]

    def step(self) -> None:
        self.step_count += 1
        d = self.decay
        for i, (name, p) in enumerate(self.params):
            g = _check_grad(name, p)
            v = self.second_moment[i]
            v *= d
            v += (1.0 - d) * g * g
            p.values = p.values - self.lr * g / (np.sqrt(v) + self.eps)

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.zero_grad()

import numpy as np
import pytest

from danmakugen.autodiff import Tensor


def finite_difference_gradients(build_loss, params, h=1e-5):
    """Central finite differences of a scalar loss w.r.t. every param element.

    build_loss() must rebuild the graph from the params' current values.
    Returns one array per param, shaped like it.
    """
    grads = []
    for p in params:
        flat = p.values.reshape(-1)
        g = np.empty_like(flat)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up = float(build_loss().values)
            flat[idx] = orig - h
            down = float(build_loss().values)
            flat[idx] = orig
            g[idx] = (up - down) / (2.0 * h)
        grads.append(g.reshape(p.values.shape))
    return grads


def assert_gradients_match(build_loss, params, tol=1e-6, h=1e-5):
    """Backward pass vs the finite-difference oracle at relative error <= tol."""
    for p in params:
        p.zero_grad()
    loss = build_loss()
    loss.backward()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.values) for p in params]
    numeric = finite_difference_gradients(build_loss, params, h=h)
    for p, a, n in zip(params, analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
        rel = np.abs(a - n) / denom
        worst = float(rel.max()) if rel.size else 0.0
        assert worst <= tol, f"gradient mismatch (rel err {worst:.3g}) for param shape {p.values.shape}"


def leaf(rng, shape, scale=1.0, requires_grad=True):
    return Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=requires_grad)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

"""Tape-based reverse-mode autodiff on dense float64 arrays.

Every op builds a fresh node holding a backward closure; graphs are rebuilt
per training step, and gradients accumulate into ``.grad`` until explicitly
reset. Ops are immutable-input / fresh-output, so concurrent forward passes
with frozen weights share nothing mutable.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (evaluation fast path)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """Dense float64 array with an optional gradient slot."""

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward", "_done")

    def __init__(self, values, requires_grad: bool = False):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._done = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        return float(self.values)

    def detach(self) -> "Tensor":
        """Fresh leaf sharing values; gradients do not flow past it."""
        return Tensor(self.values, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def assert_finite(self, label: str = "tensor") -> "Tensor":
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError(f"non-finite values in {label}")
        return self

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:  # pragma: no cover
        return f"Tensor(shape={self.values.shape}, requires_grad={self.requires_grad})"

    # operator sugar; the heavy lifting lives in the module-level ops
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(values: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    out = Tensor(values)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _ensure_grad(t: Tensor) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.values)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every recorded ancestor of a scalar loss.

    A second call on the same loss without rebuilding the graph is an error.
    """
    if loss.values.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.values.shape}")
    if loss._done:
        raise RuntimeError("backward already ran on this loss; rebuild the graph or reset first")
    order = _topo_order(loss)
    loss.grad = np.ones_like(loss.values)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    loss._done = True


def _topo_order(root: Tensor) -> list[Tensor]:
    """Iterative post-order over parent edges; rejects cycles defensively."""
    order: list[Tensor] = []
    state: dict[int, int] = {}  # 1 = on stack, 2 = finished
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            state[id(node)] = 2
            order.append(node)
            continue
        st = state.get(id(node))
        if st == 2:
            continue
        if st == 1:
            raise RuntimeError("cycle detected in recorded computation graph")
        state[id(node)] = 1
        stack.append((node, True))
        for parent in node._parents:
            if state.get(id(parent)) is None:
                stack.append((parent, False))
            elif state.get(id(parent)) == 1:
                raise RuntimeError("cycle detected in recorded computation graph")
    return order


# ---------------------------------------------------------------------------
# elementwise / structural ops
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_values = a.values + b.values

    def bw(g):
        if a.requires_grad:
            _ensure_grad(a)
            a.grad += _unbroadcast(g, a.values.shape)
        if b.requires_grad:
            _ensure_grad(b)
            b.grad += _unbroadcast(g, b.values.shape)

    return _make(out_values, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_values = a.values - b.values

    def bw(g):
        if a.requires_grad:
            _ensure_grad(a)
            a.grad += _unbroadcast(g, a.values.shape)
        if b.requires_grad:
            _ensure_grad(b)
            b.grad -= _unbroadcast(g, b.values.shape)

    return _make(out_values, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_values = a.values * b.values

    def bw(g):
        if a.requires_grad:
            _ensure_grad(a)
            a.grad += _unbroadcast(g * b.values, a.values.shape)
        if b.requires_grad:
            _ensure_grad(b)
            b.grad += _unbroadcast(g * a.values, b.values.shape)

    return _make(out_values, (a, b), bw)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.values.ndim != 2 or b.values.ndim != 2:
        raise ValueError(
            f"matmul expects 2-d operands, got {a.values.shape} @ {b.values.shape}"
        )
    out_values = a.values @ b.values

    def bw(g):
        if a.requires_grad:
            _ensure_grad(a)
            a.grad += g @ b.values.T
        if b.requires_grad:
            _ensure_grad(b)
            b.grad += a.values.T @ g

    return _make(out_values, (a, b), bw)


def getitem(a: Tensor, key) -> Tensor:
    out_values = a.values[key]

    def bw(g):
        if a.requires_grad:
            _ensure_grad(a)
            a.grad[key] += g

    return _make(out_values, (a,), bw)


def reshape(a: Tensor, shape) -> Tensor:
    out_values = a.values.reshape(shape)

    def bw(g):
        if a.requires_grad:
            _ensure_grad(a)
            a.grad += g.reshape(a.values.shape)

    return _make(out_values, (a,), bw)


def transpose(a: Tensor, axes) -> Tensor:
    out_values = np.transpose(a.values, axes)
    inverse = np.argsort(axes)

    def bw(g):
        if a.requires_grad:
            _ensure_grad(a)
            a.grad += np.transpose(g, inverse)

    return _make(out_values, (a,), bw)


def concat(tensors: Iterable[Tensor], axis: int) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    out_values = np.concatenate([t.values for t in ts], axis=axis)
    sizes = [t.values.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                _ensure_grad(t)
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t.grad += g[tuple(idx)]

    return _make(out_values, ts, bw)


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    out_values = a.values.mean(axis=axis)
    count = a.values.size if axis is None else a.values.shape[axis]

    def bw(g):
        if a.requires_grad:
            _ensure_grad(a)
            if axis is None:
                a.grad += g / count
            else:
                a.grad += np.expand_dims(g, axis) / count

    return _make(out_values, (a,), bw)


def total(a: Tensor) -> Tensor:
    out_values = np.asarray(a.values.sum())

    def bw(g):
        if a.requires_grad:
            _ensure_grad(a)
            a.grad += g

    return _make(out_values, (a,), bw)


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

def relu(a: Tensor) -> Tensor:
    out_values = np.maximum(a.values, 0.0)

    def bw(g):
        if a.requires_grad:
            _ensure_grad(a)
            a.grad += g * (a.values > 0.0)

    return _make(out_values, (a,), bw)


def tanh(a: Tensor) -> Tensor:
    out_values = np.tanh(a.values)

    def bw(g):
        if a.requires_grad:
            _ensure_grad(a)
            a.grad += g * (1.0 - out_values * out_values)

    return _make(out_values, (a,), bw)


def _sigmoid_values(x: np.ndarray) -> np.ndarray:
    # two-branch form stays finite for |x| up to the float64 exp range
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    out_values = _sigmoid_values(a.values)

    def bw(g):
        if a.requires_grad:
            _ensure_grad(a)
            a.grad += g * out_values * (1.0 - out_values)

    return _make(out_values, (a,), bw)


def sin(a: Tensor) -> Tensor:
    out_values = np.sin(a.values)

    def bw(g):
        if a.requires_grad:
            _ensure_grad(a)
            a.grad += g * np.cos(a.values)

    return _make(out_values, (a,), bw)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

_BCE_EPS = 1e-12


def binary_cross_entropy(p: Tensor, target) -> Tensor:
    """Mean BCE over all elements; probabilities clamped to (eps, 1-eps)."""
    t = as_tensor(target)
    pc = np.clip(p.values, _BCE_EPS, 1.0 - _BCE_EPS)
    out_values = np.asarray(
        -(t.values * np.log(pc) + (1.0 - t.values) * np.log1p(-pc)).mean()
    )
    inside = (p.values > _BCE_EPS) & (p.values < 1.0 - _BCE_EPS)

    def bw(g):
        if p.requires_grad:
            _ensure_grad(p)
            dp = (pc - t.values) / (pc * (1.0 - pc)) / p.values.size
            p.grad += g * dp * inside

    return _make(out_values, (p, t), bw)


def mse(a: Tensor, b) -> Tensor:
    """Mean squared error over all elements."""
    bt = as_tensor(b)
    diff = a.values - bt.values
    out_values = np.asarray((diff * diff).mean())

    def bw(g):
        scale = 2.0 / diff.size
        if a.requires_grad:
            _ensure_grad(a)
            a.grad += g * scale * diff
        if bt.requires_grad:
            _ensure_grad(bt)
            bt.grad -= g * scale * diff

    return _make(out_values, (a, bt), bw)


# ---------------------------------------------------------------------------
# one-dimensional convolutions
# ---------------------------------------------------------------------------

def conv1d_out_length(length: int, kernel: int, stride: int, padding: int) -> int:
    if length + 2 * padding < kernel:
        raise ValueError(
            f"conv1d input length {length} with padding {padding} is shorter than kernel {kernel}"
        )
    return (length + 2 * padding - kernel) // stride + 1


def conv1d_transpose_out_length(length: int, kernel: int, stride: int, padding: int) -> int:
    out = (length - 1) * stride - 2 * padding + kernel
    if out <= 0:
        raise ValueError(
            f"conv1d_transpose output length {out} is not positive "
            f"(length={length}, kernel={kernel}, stride={stride}, padding={padding})"
        )
    return out


def _window_view(xp: np.ndarray, kernel: int, stride: int, l_out: int) -> np.ndarray:
    """(batch, channels, length_padded) -> read-only (batch, channels, kernel, l_out)."""
    batch, channels, _ = xp.shape
    sb, sc, sl = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp, shape=(batch, channels, kernel, l_out),
        strides=(sb, sc, sl, sl * stride), writeable=False,
    )


def conv1d(x: Tensor, w: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation over (batch, channels, length) with (c_out, c_in, k) weights."""
    xv, wv = x.values, w.values
    if xv.ndim != 3 or wv.ndim != 3:
        raise ValueError(f"conv1d expects 3-d input/weights, got {xv.shape} and {wv.shape}")
    batch, c_in, length = xv.shape
    c_out, c_in_w, kernel = wv.shape
    if c_in != c_in_w:
        raise ValueError(f"conv1d channel mismatch: input has {c_in}, weights expect {c_in_w}")
    l_out = conv1d_out_length(length, kernel, stride, padding)
    xp = np.pad(xv, ((0, 0), (0, 0), (padding, padding))) if padding else np.ascontiguousarray(xv)
    # im2col: one GEMM over (c_in * k) x (batch * l_out)
    col = np.ascontiguousarray(_window_view(xp, kernel, stride, l_out).transpose(1, 2, 0, 3))
    col2 = col.reshape(c_in * kernel, batch * l_out)
    out2 = wv.reshape(c_out, c_in * kernel) @ col2
    out_values = np.ascontiguousarray(out2.reshape(c_out, batch, l_out).transpose(1, 0, 2))

    def bw(g):
        g2 = np.ascontiguousarray(g.transpose(1, 0, 2)).reshape(c_out, batch * l_out)
        if w.requires_grad:
            _ensure_grad(w)
            w.grad += (g2 @ col2.T).reshape(c_out, c_in, kernel)
        if x.requires_grad:
            _ensure_grad(x)
            dcol = (wv.reshape(c_out, c_in * kernel).T @ g2)
            dcol = dcol.reshape(c_in, kernel, batch, l_out).transpose(2, 0, 1, 3)
            gxp = np.zeros_like(xp)
            for k in range(kernel):
                gxp[:, :, k : k + stride * l_out : stride] += dcol[:, :, k, :]
            x.grad += gxp[:, :, padding : padding + length] if padding else gxp

    return _make(out_values, (x, w), bw)


def conv1d_transpose(x: Tensor, w: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Adjoint of conv1d over (batch, channels, length) with (c_in, c_out, k) weights."""
    xv, wv = x.values, w.values
    if xv.ndim != 3 or wv.ndim != 3:
        raise ValueError(
            f"conv1d_transpose expects 3-d input/weights, got {xv.shape} and {wv.shape}"
        )
    batch, c_in, length = xv.shape
    c_in_w, c_out, kernel = wv.shape
    if c_in != c_in_w:
        raise ValueError(
            f"conv1d_transpose channel mismatch: input has {c_in}, weights expect {c_in_w}"
        )
    l_out = conv1d_transpose_out_length(length, kernel, stride, padding)
    x2 = np.ascontiguousarray(xv.transpose(1, 0, 2)).reshape(c_in, batch * length)
    w2 = wv.reshape(c_in, c_out * kernel)
    col = (w2.T @ x2).reshape(c_out, kernel, batch, length).transpose(2, 0, 1, 3)
    full = np.zeros((batch, c_out, l_out + 2 * padding))
    for k in range(kernel):
        full[:, :, k : k + stride * length : stride] += col[:, :, k, :]
    out_values = full[:, :, padding : padding + l_out] if padding else full

    def bw(g):
        gp = np.pad(g, ((0, 0), (0, 0), (padding, padding))) if padding else np.ascontiguousarray(g)
        gcol = _window_view(gp, kernel, stride, length)  # (batch, c_out, kernel, length)
        gcol2 = np.ascontiguousarray(gcol.transpose(1, 2, 0, 3)).reshape(c_out * kernel, batch * length)
        if w.requires_grad:
            _ensure_grad(w)
            w.grad += (x2 @ gcol2.T).reshape(c_in, c_out, kernel)
        if x.requires_grad:
            _ensure_grad(x)
            dx2 = w2 @ gcol2
            x.grad += np.ascontiguousarray(dx2.reshape(c_in, batch, length).transpose(1, 0, 2))

    return _make(out_values, (x, w), bw)


# ---------------------------------------------------------------------------
# fused LSTM layer
# ---------------------------------------------------------------------------

def lstm_layer(x: Tensor, wx: Tensor, wh: Tensor, b: Tensor) -> Tensor:
    """One LSTM layer over (batch, time, features) -> (batch, time, hidden).

    Fused gate layout along the 4H axis is [input, forget, output, candidate];
    initial hidden and cell states are zero. A single tape node per layer keeps
    the recurrence loop in plain array code.
    """
    xv = x.values
    if xv.ndim != 3:
        raise ValueError(f"lstm_layer expects (batch, time, features) input, got {xv.shape}")
    batch, steps, d_in = xv.shape
    h4 = wx.values.shape[1]
    hidden = h4 // 4
    if wx.values.shape != (d_in, h4) or wh.values.shape != (hidden, h4) or b.values.shape != (h4,):
        raise ValueError(
            f"lstm_layer weight shapes {wx.values.shape}/{wh.values.shape}/{b.values.shape} "
            f"do not match input feature dim {d_in} and hidden dim {hidden}"
        )
    whv = wh.values
    zx = (xv.reshape(batch * steps, d_in) @ wx.values + b.values).reshape(batch, steps, h4)
    gates = np.empty((steps, batch, h4))
    cells = np.empty((steps, batch, hidden))
    tanh_cells = np.empty((steps, batch, hidden))
    hiddens = np.empty((steps, batch, hidden))
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    for t in range(steps):
        z = zx[:, t, :] + h @ whv
        act = np.empty_like(z)
        # logistic via tanh keeps the gate computation one stable ufunc call
        act[:, : 3 * hidden] = 0.5 * (1.0 + np.tanh(0.5 * z[:, : 3 * hidden]))
        act[:, 3 * hidden :] = np.tanh(z[:, 3 * hidden :])
        gate_i = act[:, :hidden]
        gate_f = act[:, hidden : 2 * hidden]
        cand = act[:, 3 * hidden :]
        c = gate_f * c + gate_i * cand
        tc = np.tanh(c)
        h = act[:, 2 * hidden : 3 * hidden] * tc
        gates[t] = act
        cells[t] = c
        tanh_cells[t] = tc
        hiddens[t] = h
    out_values = np.ascontiguousarray(hiddens.transpose(1, 0, 2))

    def bw(g):
        zeros_bh = np.zeros((batch, hidden))
        dz_all = np.empty((steps, batch, h4))
        dh = np.zeros((batch, hidden))
        dc = np.zeros((batch, hidden))
        for t in range(steps - 1, -1, -1):
            act = gates[t]
            gate_i = act[:, :hidden]
            gate_f = act[:, hidden : 2 * hidden]
            gate_o = act[:, 2 * hidden : 3 * hidden]
            cand = act[:, 3 * hidden :]
            tc = tanh_cells[t]
            c_prev = cells[t - 1] if t > 0 else zeros_bh
            dh_t = g[:, t, :] + dh
            dct = dc + dh_t * gate_o * (1.0 - tc * tc)
            dz = dz_all[t]
            dz[:, :hidden] = dct * cand * gate_i * (1.0 - gate_i)
            dz[:, hidden : 2 * hidden] = dct * c_prev * gate_f * (1.0 - gate_f)
            dz[:, 2 * hidden : 3 * hidden] = dh_t * tc * gate_o * (1.0 - gate_o)
            dz[:, 3 * hidden :] = dct * gate_i * (1.0 - cand * cand)
            dc = dct * gate_f
            dh = dz @ whv.T
        dz2 = dz_all.reshape(steps * batch, h4)
        if b.requires_grad:
            _ensure_grad(b)
            b.grad += dz2.sum(axis=0)
        if wh.requires_grad:
            _ensure_grad(wh)
            h_prev = np.concatenate([zeros_bh[None], hiddens[:-1]], axis=0)
            wh.grad += h_prev.reshape(steps * batch, hidden).T @ dz2
        if wx.requires_grad or x.requires_grad:
            dz_bt = np.ascontiguousarray(dz_all.transpose(1, 0, 2)).reshape(batch * steps, h4)
            if wx.requires_grad:
                _ensure_grad(wx)
                wx.grad += xv.reshape(batch * steps, d_in).T @ dz_bt
            if x.requires_grad:
                _ensure_grad(x)
                x.grad += (dz_bt @ wx.values.T).reshape(batch, steps, d_in)

    return _make(out_values, (x, wx, wh, b), bw)

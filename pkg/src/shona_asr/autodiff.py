"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps a float64 ndarray plus an optional gradient; ops build a
graph of backward closures and backward() replays them in reverse
topological order. The op set is exactly what the two models here need:
2-D convolution, max pooling, dense layers, a fused LSTM cell, softmax
family, and single-head scaled dot-product attention.

Values are float64 throughout; a graph must stay on one thread from
forward through backward, but separate graphs are independent.
"""

from __future__ import annotations

import math

import numpy as np


class Tensor:
    """N-dimensional value node in a differentiation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_backward_done")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward_fn=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = parents
        self._backward = backward_fn
        self._backward_done = False

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, (have, want) in enumerate(zip(g.shape, shape)):
        if want == 1 and have != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def _node(data, parents, backward_fn) -> Tensor:
    requires = any(p.requires_grad for p in parents)
    if not requires:
        return Tensor(data)
    return Tensor(data, requires_grad=True, parents=parents, backward_fn=backward_fn)


def backward(loss: Tensor) -> None:
    """Populate gradients of everything reachable from a scalar loss.

    Gradients accumulate additively into .grad, both across fan-out inside
    one graph and across repeated backward calls on different graphs.
    Calling backward twice on the same root is an error.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if loss._backward_done:
        raise RuntimeError("backward already ran on this graph root; zero_grad and rebuild first")
    loss._backward_done = True

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


class Parameters:
    """Named map of trainable tensors."""

    def __init__(self):
        self._tensors: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._tensors:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(data, requires_grad=True)
        self._tensors[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.grad = None

    def copy_values(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._tensors.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for name, arr in values.items():
            t = self._tensors[name]
            if t.data.shape != arr.shape:
                raise ValueError(f"shape mismatch loading {name!r}: {t.data.shape} vs {arr.shape}")
            t.data = np.array(arr, dtype=np.float64)


# ---------------------------------------------------------------------------
# elementwise and structural ops
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _node(out_data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(out_data, (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    def bwd(g):
        _accumulate(a, g * c)

    return _node(a.data * c, (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data @ b.data

    def bwd(g):
        if a.data.ndim == 1 and b.data.ndim == 2:
            _accumulate(a, g @ b.data.T)
            _accumulate(b, np.outer(a.data, g))
        elif a.data.ndim == 2 and b.data.ndim == 1:
            _accumulate(a, np.outer(g, b.data))
            _accumulate(b, a.data.T @ g)
        else:
            _accumulate(a, g @ b.data.T)
            _accumulate(b, a.data.T @ g)

    return _node(out_data, (a, b), bwd)


def transpose(a: Tensor) -> Tensor:
    def bwd(g):
        _accumulate(a, g.T)

    return _node(a.data.T, (a,), bwd)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def bwd(g):
        _accumulate(a, g * mask)

    return _node(a.data * mask, (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))

    def bwd(g):
        _accumulate(a, g * y * (1.0 - y))

    return _node(y, (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def bwd(g):
        _accumulate(a, g * (1.0 - y * y))

    return _node(y, (a,), bwd)


def tsum(a: Tensor) -> Tensor:
    def bwd(g):
        _accumulate(a, np.full_like(a.data, float(g)))

    return _node(a.data.sum(), (a,), bwd)


def row(a: Tensor, i: int) -> Tensor:
    """Select row i of a 2-D tensor as a 1-D tensor."""

    def bwd(g):
        if a.requires_grad:
            grad = np.zeros_like(a.data)
            grad[i] = g
            _accumulate(a, grad)

    return _node(a.data[i], (a,), bwd)


def stack_rows(rows: list[Tensor]) -> Tensor:
    """Stack 1-D tensors into a [len(rows), d] tensor."""
    out_data = np.stack([r.data for r in rows])

    def bwd(g):
        for i, r in enumerate(rows):
            _accumulate(r, g[i])

    return _node(out_data, tuple(rows), bwd)


def gather_rows(a: Tensor, indices: np.ndarray) -> Tensor:
    """Row lookup (embedding): out[i] = a[indices[i]]."""
    indices = np.asarray(indices, dtype=np.int64)

    def bwd(g):
        if a.requires_grad:
            grad = np.zeros_like(a.data)
            np.add.at(grad, indices, g)
            _accumulate(a, grad)

    return _node(a.data[indices], (a,), bwd)


def take_per_row(a: Tensor, cols: np.ndarray) -> Tensor:
    """out[i] = a[i, cols[i]] for a 2-D tensor."""
    cols = np.asarray(cols, dtype=np.int64)
    rows_idx = np.arange(a.data.shape[0])

    def bwd(g):
        if a.requires_grad:
            grad = np.zeros_like(a.data)
            grad[rows_idx, cols] = g
            _accumulate(a, grad)

    return _node(a.data[rows_idx, cols], (a,), bwd)


# ---------------------------------------------------------------------------
# softmax family
# ---------------------------------------------------------------------------

def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, max-subtracted for stability."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        inner = (g * y).sum(axis=-1, keepdims=True)
        _accumulate(a, y * (g - inner))

    return _node(y, (a,), bwd)


def log_softmax(a: Tensor) -> Tensor:
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out_data = shifted - log_z
    y = np.exp(out_data)

    def bwd(g):
        _accumulate(a, g - y * g.sum(axis=-1, keepdims=True))

    return _node(out_data, (a,), bwd)


def cross_entropy(logits: Tensor, target_index: int) -> Tensor:
    """Negative log-probability of the target class under the logits."""
    if not 0 <= target_index < logits.data.shape[-1]:
        raise ValueError(f"target index {target_index} out of range for {logits.data.shape[-1]} classes")
    return scale(row_pick(log_softmax(logits), target_index), -1.0)


def row_pick(a: Tensor, i: int) -> Tensor:
    """Select element i of a 1-D tensor as a scalar tensor."""

    def bwd(g):
        if a.requires_grad:
            grad = np.zeros_like(a.data)
            grad[i] = float(g)
            _accumulate(a, grad)

    return _node(a.data[i], (a,), bwd)


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------

def conv2d(x: Tensor, kernels: Tensor, bias: Tensor) -> Tensor:
    """Same-padded stride-1 cross-correlation.

    x: [C_in, H, W], kernels: [C_out, C_in, kH, kW] (odd kH/kW), bias: [C_out]
    -> [C_out, H, W]
    """
    c_in, h, w = x.data.shape
    c_out, kc, kh, kw = kernels.data.shape
    if kc != c_in:
        raise ValueError(f"kernel expects {kc} input channels, input has {c_in}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError("same-padding conv requires odd kernel dims")
    if bias.data.shape != (c_out,):
        raise ValueError(f"bias shape {bias.data.shape} != ({c_out},)")
    ph, pw = kh // 2, kw // 2
    padded = np.pad(x.data, ((0, 0), (ph, ph), (pw, pw)))
    patches = np.empty((c_in, kh, kw, h, w))
    for di in range(kh):
        for dj in range(kw):
            patches[:, di, dj] = padded[:, di:di + h, dj:dj + w]
    pm = patches.reshape(c_in * kh * kw, h * w)
    km = kernels.data.reshape(c_out, c_in * kh * kw)
    out_data = (km @ pm).reshape(c_out, h, w) + bias.data[:, None, None]

    def bwd(g):
        gm = g.reshape(c_out, h * w)
        _accumulate(bias, gm.sum(axis=1))
        _accumulate(kernels, (gm @ pm.T).reshape(kernels.data.shape))
        if x.requires_grad:
            dpm = (km.T @ gm).reshape(c_in, kh, kw, h, w)
            dpadded = np.zeros_like(padded)
            for di in range(kh):
                for dj in range(kw):
                    dpadded[:, di:di + h, dj:dj + w] += dpm[:, di, dj]
            _accumulate(x, dpadded[:, ph:ph + h, pw:pw + w])

    return _node(out_data, (x, kernels, bias), bwd)


def max_pool2d(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; trailing odd row/column dropped.

    Gradient flows to the first maximal element of each window (row-major
    order within the window).
    """
    c, h, w = x.data.shape
    h2, w2 = h // 2, w // 2
    if h2 == 0 or w2 == 0:
        raise ValueError(f"input {h}x{w} smaller than one 2x2 window")
    crop = x.data[:, :h2 * 2, :w2 * 2]
    windows = crop.reshape(c, h2, 2, w2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h2, w2, 4)
    argmax = windows.argmax(axis=3)
    out_data = np.take_along_axis(windows, argmax[..., None], axis=3)[..., 0]

    def bwd(g):
        dwin = np.zeros_like(windows)
        np.put_along_axis(dwin, argmax[..., None], g[..., None], axis=3)
        dcrop = dwin.reshape(c, h2, w2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h2 * 2, w2 * 2)
        dx = np.zeros_like(x.data)
        dx[:, :h2 * 2, :w2 * 2] = dcrop
        _accumulate(x, dx)

    return _node(out_data, (x,), bwd)


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map W @ x + b; a 2-D x is treated as rows of inputs."""
    m, n = weight.data.shape
    if x.data.shape[-1] != n:
        raise ValueError(f"dense expects inputs of dim {n}, got {x.data.shape}")
    if bias.data.shape != (m,):
        raise ValueError(f"bias shape {bias.data.shape} != ({m},)")
    out_data = x.data @ weight.data.T + bias.data

    def bwd(g):
        if x.data.ndim == 1:
            _accumulate(weight, np.outer(g, x.data))
            _accumulate(bias, g)
        else:
            _accumulate(weight, g.T @ x.data)
            _accumulate(bias, g.sum(axis=0))
        _accumulate(x, g @ weight.data)

    return _node(out_data, (x, weight, bias), bwd)


def channels_to_rows(x: Tensor) -> Tensor:
    """Reinterpret [C, T, W] as a per-timestep feature matrix [T, C*W]."""
    c, t, w = x.data.shape
    out_data = x.data.transpose(1, 0, 2).reshape(t, c * w)

    def bwd(g):
        _accumulate(x, g.reshape(t, c, w).transpose(1, 0, 2))

    return _node(out_data, (x,), bwd)


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, w_ih: Tensor, w_hh: Tensor,
              b: Tensor) -> tuple[Tensor, Tensor]:
    """One LSTM step with fused gates.

    Gate layout along the 4k axis is [input, forget, candidate, output]:
    i, f, o = sigmoid(W x + U h + b); g = tanh(.); c' = f*c + i*g;
    h' = o * tanh(c').
    """
    k = h.data.shape[0]
    if w_ih.data.shape[0] != 4 * k or w_hh.data.shape != (4 * k, k) or b.data.shape != (4 * k,):
        raise ValueError(f"gate parameter shapes inconsistent with hidden size {k}")
    if w_ih.data.shape[1] != x.data.shape[0]:
        raise ValueError(f"W_ih expects input dim {w_ih.data.shape[1]}, got {x.data.shape[0]}")
    pre = w_ih.data @ x.data + w_hh.data @ h.data + b.data
    i_g = 1.0 / (1.0 + np.exp(-pre[:k]))
    f_g = 1.0 / (1.0 + np.exp(-pre[k:2 * k]))
    g_g = np.tanh(pre[2 * k:3 * k])
    o_g = 1.0 / (1.0 + np.exp(-pre[3 * k:]))
    c_new = f_g * c.data + i_g * g_g
    tanh_c = np.tanh(c_new)
    h_new = o_g * tanh_c

    # One internal node carries both outputs stacked as [h'; c'] so the
    # fused backward runs exactly once even when only one output feeds the
    # loss; callers see the two rows as separate tensors.
    def bwd(g):
        dh, dc_in = g[0], g[1]
        d_o = dh * tanh_c
        dc_total = dc_in + dh * o_g * (1.0 - tanh_c * tanh_c)
        d_f = dc_total * c.data
        d_i = dc_total * g_g
        d_g = dc_total * i_g
        da = np.concatenate([
            d_i * i_g * (1.0 - i_g),
            d_f * f_g * (1.0 - f_g),
            d_g * (1.0 - g_g * g_g),
            d_o * o_g * (1.0 - o_g),
        ])
        _accumulate(w_ih, np.outer(da, x.data))
        _accumulate(w_hh, np.outer(da, h.data))
        _accumulate(b, da)
        _accumulate(x, w_ih.data.T @ da)
        _accumulate(h, w_hh.data.T @ da)
        _accumulate(c, dc_total * f_g)

    pair = _node(np.stack([h_new, c_new]), (x, h, c, w_ih, w_hh, b), bwd)
    return row(pair, 0), row(pair, 1)


def attention_layer(seq: Tensor, w_q: Tensor, w_k: Tensor, w_v: Tensor) -> Tensor:
    """Single-head scaled dot-product self-attention with a residual path.

    seq: [T, d]; the three projections are square [d, d]. Output is
    seq + softmax(Q K^T / sqrt(d)) V, shape-preserving.
    """
    d = seq.data.shape[1]
    q = matmul(seq, w_q)
    k = matmul(seq, w_k)
    v = matmul(seq, w_v)
    scores = scale(matmul(q, transpose(k)), 1.0 / math.sqrt(d))
    weights = softmax(scores)
    return add(seq, matmul(weights, v))


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def he_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def xavier_uniform(rng: np.random.Generator, shape: tuple, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)

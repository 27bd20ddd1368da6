"""Minimal reverse-mode autodiff over numpy float64 arrays.

Just enough operator coverage for GRU sequence models with attention and
a copy mechanism: embedding gathers, (batched) matmul, elementwise
arithmetic, softmax, per-row picks/scatters, and a fused GRU step whose
backward pass is hand-derived.  Graphs are built per training example and
discarded; parameters are leaf tensors whose `.grad` accumulates until
the caller consumes it.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward", "needs_grad")

    def __init__(self, data, parents=(), backward=None, needs_grad=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._parents = parents
        self._backward = backward
        if needs_grad is None:
            needs_grad = any(p.needs_grad for p in parents)
        self.needs_grad = needs_grad

    @property
    def shape(self):
        return self.data.shape

    def _accumulate(self, g):
        if not self.needs_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self, seed=None):
        """Accumulate d(self)/d(leaf) into every reachable leaf's .grad."""
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited or not node.needs_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        if seed is None:
            seed = np.ones_like(self.data)
        self._accumulate(np.asarray(seed, dtype=np.float64))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def param(data) -> Tensor:
    return Tensor(data, needs_grad=True)


def constant(data) -> Tensor:
    return Tensor(data, needs_grad=False)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that broadcasting expanded."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, (a, b))
    def back(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(g, b.data.shape))
    out._backward = back
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, (a, b))
    def back(g):
        a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        b._accumulate(_unbroadcast(g * a.data, b.data.shape))
    out._backward = back
    return out


def add_const(a: Tensor, c: np.ndarray) -> Tensor:
    out = Tensor(a.data + c, (a,))
    out._backward = lambda g: a._accumulate(_unbroadcast(g, a.data.shape))
    return out


def mul_const(a: Tensor, c) -> Tensor:
    c = np.asarray(c, dtype=np.float64)
    out = Tensor(a.data * c, (a,))
    out._backward = lambda g: a._accumulate(_unbroadcast(g * c, a.data.shape))
    return out


def one_minus(a: Tensor) -> Tensor:
    out = Tensor(1.0 - a.data, (a,))
    out._backward = lambda g: a._accumulate(-g)
    return out


def dot(a: Tensor, b: Tensor) -> Tensor:
    """a @ b with a 2D or 3D (batched rows), b 2D."""
    out = Tensor(a.data @ b.data, (a, b))
    def back(g):
        a._accumulate(g @ b.data.T)
        if a.data.ndim == 2:
            b._accumulate(a.data.T @ g)
        else:
            k = a.data.shape[-1]
            b._accumulate(a.data.reshape(-1, k).T @ g.reshape(-1, g.shape[-1]))
    out._backward = back
    return out


def bmm(a: Tensor, b: Tensor) -> Tensor:
    """Batched matmul: (B,N,M) @ (B,M,K) -> (B,N,K)."""
    out = Tensor(a.data @ b.data, (a, b))
    def back(g):
        a._accumulate(g @ b.data.transpose(0, 2, 1))
        b._accumulate(a.data.transpose(0, 2, 1) @ g)
    out._backward = back
    return out


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(y, (a,))
    out._backward = lambda g: a._accumulate(g * y * (1.0 - y))
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y, (a,))
    out._backward = lambda g: a._accumulate(g * (1.0 - y * y))
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data), (a,))
    out._backward = lambda g: a._accumulate(g / a.data)
    return out


def softmax(a: Tensor) -> Tensor:
    """Row-wise softmax over the last axis."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y, (a,))
    def back(g):
        inner = (g * y).sum(axis=-1, keepdims=True)
        a._accumulate(y * (g - inner))
    out._backward = back
    return out


def embed(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup: out.shape = ids.shape + (D,)."""
    ids = np.asarray(ids, dtype=np.int64)
    out = Tensor(table.data[ids], (table,))
    def back(g):
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, ids.ravel(), g.reshape(-1, table.data.shape[1]))
    out._backward = back if table.needs_grad else None
    return out


def pick(a: Tensor, ids: np.ndarray) -> Tensor:
    """out[i] = a[i, ids[i]] for a (B,V), ids (B,)."""
    ids = np.asarray(ids, dtype=np.int64)
    rows = np.arange(a.data.shape[0])
    out = Tensor(a.data[rows, ids], (a,))
    def back(g):
        full = np.zeros_like(a.data)
        full[rows, ids] = g
        a._accumulate(full)
    out._backward = back
    return out


def scatter_probs(weights: Tensor, ids: np.ndarray, width: int) -> Tensor:
    """Scatter-add row weights onto vocabulary columns.

    weights (B,S), ids (B,S) -> out (B,width); duplicate ids within a row
    accumulate.
    """
    ids = np.asarray(ids, dtype=np.int64)
    b = weights.data.shape[0]
    y = np.zeros((b, width), dtype=np.float64)
    rows = np.arange(b)[:, None]
    np.add.at(y, (np.broadcast_to(rows, ids.shape), ids), weights.data)
    out = Tensor(y, (weights,))
    out._backward = lambda g: weights._accumulate(g[np.arange(b)[:, None], ids])
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape), (a,))
    out._backward = lambda g: a._accumulate(g.reshape(a.data.shape))
    return out


def cols(a: Tensor, j0: int, j1: int) -> Tensor:
    out = Tensor(a.data[..., j0:j1], (a,))
    def back(g):
        full = np.zeros_like(a.data)
        full[..., j0:j1] = g
        a._accumulate(full)
    out._backward = back
    return out


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), tuple(parts))
    sizes = [p.data.shape[axis] for p in parts]
    def back(g):
        offset = 0
        for p, size in zip(parts, sizes):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(offset, offset + size)
            p._accumulate(g[tuple(idx)])
            offset += size
    out._backward = back
    return out


def slice_time(a: Tensor, t: int) -> Tensor:
    """(B,T,K) -> (B,K) at time t."""
    out = Tensor(a.data[:, t, :], (a,))
    def back(g):
        full = np.zeros_like(a.data)
        full[:, t, :] = g
        a._accumulate(full)
    out._backward = back
    return out


def stack_time(steps: list[Tensor]) -> Tensor:
    """T tensors (B,K) -> (B,T,K)."""
    out = Tensor(np.stack([s.data for s in steps], axis=1), tuple(steps))
    def back(g):
        for t, s in enumerate(steps):
            s._accumulate(g[:, t, :])
    out._backward = back
    return out


def gather_time(a: Tensor, ts: np.ndarray) -> Tensor:
    """out[i] = a[i, ts[i], :] for a (B,T,K)."""
    ts = np.asarray(ts, dtype=np.int64)
    rows = np.arange(a.data.shape[0])
    out = Tensor(a.data[rows, ts, :], (a,))
    def back(g):
        full = np.zeros_like(a.data)
        full[rows, ts, :] = g
        a._accumulate(full)
    out._backward = back
    return out


def weighted_sum(a: Tensor, w: np.ndarray) -> Tensor:
    """Scalar sum(a * w) for a (B,), constant weights w (B,)."""
    w = np.asarray(w, dtype=np.float64)
    out = Tensor(float(a.data @ w), (a,))
    out._backward = lambda g: a._accumulate(g * w)
    return out


def total(a: Tensor) -> Tensor:
    out = Tensor(float(a.data.sum()), (a,))
    out._backward = lambda g: a._accumulate(np.broadcast_to(g, a.data.shape).copy())
    return out


def gru_step(xp: Tensor, h: Tensor, w_h: Tensor) -> Tensor:
    """One GRU step with the input projection precomputed.

    xp (B,3H) = x @ W_x + b in gate order (update z | reset r | candidate n);
    h (B,H) previous state; w_h (H,3H) recurrent weights.

        z  = sigmoid(xp_z + (h @ W_h)_z)
        r  = sigmoid(xp_r + (h @ W_h)_r)
        c  = tanh(xp_n + r * (h @ W_h)_n)
        h' = z * h + (1 - z) * c
    """
    hh = h.data.shape[1]
    rec = h.data @ w_h.data
    z = 1.0 / (1.0 + np.exp(-(xp.data[:, :hh] + rec[:, :hh])))
    r = 1.0 / (1.0 + np.exp(-(xp.data[:, hh:2 * hh] + rec[:, hh:2 * hh])))
    c = np.tanh(xp.data[:, 2 * hh:] + r * rec[:, 2 * hh:])
    out = Tensor(z * h.data + (1.0 - z) * c, (xp, h, w_h))

    def back(g):
        dz = g * (h.data - c)
        dc = g * (1.0 - z)
        dc_pre = dc * (1.0 - c * c)
        dr = dc_pre * rec[:, 2 * hh:]
        dz_pre = dz * z * (1.0 - z)
        dr_pre = dr * r * (1.0 - r)
        dxp = np.concatenate([dz_pre, dr_pre, dc_pre], axis=1)
        drec = np.concatenate([dz_pre, dr_pre, dc_pre * r], axis=1)
        xp._accumulate(dxp)
        h._accumulate(g * z + drec @ w_h.data.T)
        w_h._accumulate(h.data.T @ drec)
    out._backward = back
    return out

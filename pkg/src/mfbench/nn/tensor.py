"""Tape-based reverse-mode differentiation over float64 numpy arrays.

Every op appends one node to the active :class:`Tape` when at least one input
requires a gradient.  Outside a tape, ops just compute values, which is how
inference and stop-gradient features are evaluated.  Arrays may carry leading
batch axes; the trailing two axes play the role of ``rows x cols``.
"""

from __future__ import annotations

import math
import threading
from typing import Callable, Sequence

import numpy as np

from mfbench.errors import ConfigError, DimensionError, StateError

_local = threading.local()

GELU_C = math.sqrt(2.0 / math.pi)
GELU_A = 0.044715


def _stack() -> list:
    st = getattr(_local, "stack", None)
    if st is None:
        st = _local.stack = []
    return st


def active_tape() -> Tape | None:
    st = _stack()
    return st[-1] if st else None


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "is_leaf", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.is_leaf = True
        self.name = name
        self.grad = np.zeros_like(self.data) if requires_grad else None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[-2] if self.data.ndim >= 2 else 1

    @property
    def cols(self) -> int:
        return self.data.shape[-1]

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def detach(self) -> Tensor:
        """Stop-gradient: a constant copy of the values."""
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    def __add__(self, other):
        return add(self, _wrap(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, float(other))
        return mul(self, _wrap(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Node:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out: Tensor, inputs: Sequence[Tensor], backward: Callable):
        self.out = out
        self.inputs = inputs
        self.backward = backward


class Tape:
    """Explicit node list; use as a context manager around a forward pass."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self._used = False

    def __enter__(self) -> Tape:
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _stack().pop()

    def backward(self, loss: Tensor) -> None:
        if self._used:
            raise StateError("tape already consumed by a backward pass")
        if not self.nodes:
            raise StateError("backward called without a recorded forward pass")
        if loss.data.size != 1:
            raise StateError(f"loss must be scalar, got shape {loss.shape}")
        if loss.is_leaf or not any(n.out is loss for n in self.nodes):
            raise StateError("loss was not produced on this tape")
        self._used = True
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            in_grads = node.backward(g)
            for inp, gi in zip(node.inputs, in_grads):
                if gi is None or not inp.requires_grad:
                    continue
                if inp.is_leaf:
                    inp.grad += gi
                else:
                    key = id(inp)
                    prev = grads.get(key)
                    grads[key] = gi if prev is None else prev + gi
        self.nodes.clear()


class no_grad:
    """Evaluate ops without recording, even inside an enclosing tape."""

    def __enter__(self):
        _stack().append(None)

    def __exit__(self, *exc):
        _stack().pop()


def _result(data: np.ndarray, inputs: Sequence[Tensor], backward: Callable) -> Tensor:
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out = Tensor(data)
        out.requires_grad = True
        out.is_leaf = False
        tape.nodes.append(_Node(out, inputs, backward))
        return out
    return Tensor(data)


def unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# -- elementwise -------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    return _result(a.data + b.data, (a, b),
                   lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _result(a.data - b.data, (a, b),
                   lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _result(a.data * b.data, (a, b),
                   lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)))


def scale(a: Tensor, c: float) -> Tensor:
    return _result(a.data * c, (a,), lambda g: (g * c,))


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh form: 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x**3)))."""
    z = x.data
    z2 = z * z
    t = np.tanh(GELU_C * z * (1.0 + GELU_A * z2))
    out = 0.5 * z * (1.0 + t)

    def backward(g):
        dt = (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * z2)
        return (g * (0.5 * (1.0 + t) + 0.5 * z * dt),)

    return _result(out, (x,), backward)


# -- linear algebra ----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """``a @ b`` where ``b`` is a 2-D weight or batched like ``a``."""
    if a.cols != b.data.shape[-2]:
        raise DimensionError(f"matmul: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        if b.data.ndim == 2:
            gb = a.data.reshape(-1, a.cols).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return unbroadcast(ga, a.shape), gb

    return _result(out, (a, b), backward)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ w + b`` with ``w`` shaped (in, out)."""
    if x.cols != w.data.shape[0]:
        raise DimensionError(f"linear: input width {x.cols} != weight rows {w.data.shape[0]}")
    out = x.data @ w.data
    if b is not None:
        out = out + b.data

    def backward(g):
        gx = g @ w.data.T
        gw = x.data.reshape(-1, x.cols).T @ g.reshape(-1, g.shape[-1])
        if b is None:
            return gx, gw
        return gx, gw, g.reshape(-1, g.shape[-1]).sum(axis=0)

    inputs = (x, w) if b is None else (x, w, b)
    return _result(out, inputs, backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    z = x.data
    mu = z.mean(axis=-1, keepdims=True)
    xc = z - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        n = z.shape[-1]
        dxhat = g * gamma.data
        dx = inv / n * (n * dxhat - dxhat.sum(-1, keepdims=True)
                        - xhat * (dxhat * xhat).sum(-1, keepdims=True))
        flat = z.shape[-1]
        dgamma = (g * xhat).reshape(-1, flat).sum(axis=0)
        dbeta = g.reshape(-1, flat).sum(axis=0)
        return dx, dgamma, dbeta

    return _result(out, (x, gamma, beta), backward)


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def attention_forward(queries: Tensor, keys: Tensor, values: Tensor, heads: int) -> Tensor:
    """Multi-head scaled dot-product attention (no projections).

    Inputs are ``(..., rows, cols)``; ``cols`` is split into ``heads`` equal
    slices and each slice attends independently.
    """
    D = queries.cols
    if keys.cols != D or values.cols != D:
        raise DimensionError(f"attention: widths q={D} k={keys.cols} v={values.cols}")
    if keys.rows != values.rows:
        raise DimensionError(f"attention: {keys.rows} keys vs {values.rows} values")
    if heads < 1 or D % heads:
        raise ConfigError(f"attention: width {D} not divisible by {heads} heads")
    dh = D // heads
    sc = 1.0 / math.sqrt(dh)

    def split(a):  # (..., T, D) -> (..., h, T, dh)
        return np.swapaxes(a.reshape(a.shape[:-1] + (heads, dh)), -2, -3)

    def merge(a):  # (..., h, T, dh) -> (..., T, D)
        a = np.swapaxes(a, -2, -3)
        return a.reshape(a.shape[:-2] + (D,))

    q, k, v = split(queries.data), split(keys.data), split(values.data)
    p = softmax((q @ np.swapaxes(k, -1, -2)) * sc)
    out = merge(p @ v)

    def backward(g):
        go = split(g)
        dv = np.swapaxes(p, -1, -2) @ go
        dp = go @ np.swapaxes(v, -1, -2)
        ds = p * (dp - (dp * p).sum(-1, keepdims=True)) * sc
        dq = ds @ k
        dk = np.swapaxes(ds, -1, -2) @ q
        return (unbroadcast(merge(dq), queries.shape), unbroadcast(merge(dk), keys.shape),
                unbroadcast(merge(dv), values.shape))

    return _result(out, (queries, keys, values), backward)


# -- structural --------------------------------------------------------------


def concat(parts: Sequence[Tensor], axis: int) -> Tensor:
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward(g):
        return tuple(np.split(g, sizes, axis=axis))

    return _result(out, tuple(parts), backward)


def slice_axis(x: Tensor, start: int, stop: int, axis: int) -> Tensor:
    idx = [slice(None)] * x.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)

    def backward(g):
        full = np.zeros_like(x.data)
        full[idx] = g
        return (full,)

    return _result(x.data[idx], (x,), backward)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    return _result(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def broadcast_to(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    return _result(np.broadcast_to(x.data, shape).copy(), (x,),
                   lambda g: (unbroadcast(g, x.shape),))


def embedding(table: Tensor, index: np.ndarray) -> Tensor:
    index = np.asarray(index, dtype=np.int64)

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, index.reshape(-1), g.reshape(-1, table.cols))
        return (gt,)

    return _result(table.data[index], (table,), backward)


def take_rows(x: Tensor, index: np.ndarray) -> Tensor:
    """Gather along the leading axis (indices may repeat)."""
    index = np.asarray(index, dtype=np.int64)

    def backward(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, index, g)
        return (gx,)

    return _result(x.data[index], (x,), backward)


def mean(x: Tensor, axis: int | None = None) -> Tensor:
    if axis is None:
        n = x.data.size
        return _result(np.asarray(x.data.mean()), (x,),
                       lambda g: (np.full_like(x.data, float(g) / n),))
    n = x.shape[axis]
    return _result(x.data.mean(axis=axis, keepdims=True), (x,),
                   lambda g: (np.broadcast_to(g / n, x.shape).copy(),))


def sum_all(x: Tensor) -> Tensor:
    return _result(np.asarray(x.data.sum()), (x,), lambda g: (np.full_like(x.data, float(g)),))


def mse(pred: Tensor, target: Tensor) -> Tensor:
    """Mean of squared differences over every element."""
    diff = pred.data - target.data
    n = diff.size

    def backward(g):
        gd = (2.0 * float(g) / n) * diff
        return gd, -gd

    return _result(np.asarray((diff * diff).mean()), (pred, target), backward)

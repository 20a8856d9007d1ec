"""Parameterised building blocks on top of the tape ops.

Each block owns parameters under a dotted prefix in a :class:`ParamStore`:
``<name>.w`` / ``<name>.b`` for linears, ``<name>.fc1`` / ``<name>.fc2`` for
MLPs, ``<name>.q|k|v|o`` for attention.
"""

from __future__ import annotations

from mfbench.errors import DimensionError
from mfbench.nn import tensor as T
from mfbench.nn.params import ParamStore
from mfbench.nn.tensor import Tensor


def init_linear(store: ParamStore, name: str, d_in: int, d_out: int, bias: bool = True) -> None:
    store.uniform(f"{name}.w", (d_in, d_out), fan_in=d_in)
    if bias:
        store.zeros(f"{name}.b", (d_out,))


def init_mlp(store: ParamStore, name: str, d_in: int, d_hidden: int, d_out: int) -> None:
    init_linear(store, f"{name}.fc1", d_in, d_hidden)
    init_linear(store, f"{name}.fc2", d_hidden, d_out)


def init_layer_norm(store: ParamStore, name: str, d: int) -> None:
    store.ones(f"{name}.g", (d,))
    store.zeros(f"{name}.b", (d,))


def init_attention(store: ParamStore, name: str, d: int, d_kv: int | None = None) -> None:
    d_kv = d if d_kv is None else d_kv
    init_linear(store, f"{name}.q", d, d)
    init_linear(store, f"{name}.k", d_kv, d)
    init_linear(store, f"{name}.v", d_kv, d)
    init_linear(store, f"{name}.o", d, d)


def linear_forward(x: Tensor, params: ParamStore, name: str) -> Tensor:
    w = params[f"{name}.w"]
    if x.cols != w.shape[0]:
        raise DimensionError(f"{name}: expected input width {w.shape[0]}, got {x.cols}")
    b = params[f"{name}.b"] if f"{name}.b" in params else None
    return T.linear(x, w, b)


def mlp_forward(x: Tensor, params: ParamStore, name: str) -> Tensor:
    """Two linear layers with a GELU between them."""
    w1 = params[f"{name}.fc1.w"]
    if x.cols != w1.shape[0]:
        raise DimensionError(f"MLP block {name!r}: expected input width {w1.shape[0]}, got {x.cols}")
    h = T.gelu(linear_forward(x, params, f"{name}.fc1"))
    return linear_forward(h, params, f"{name}.fc2")


def layer_norm_forward(x: Tensor, params: ParamStore, name: str) -> Tensor:
    return T.layer_norm(x, params[f"{name}.g"], params[f"{name}.b"])


def attention_block(x_q: Tensor, x_kv: Tensor, params: ParamStore, name: str, heads: int) -> Tensor:
    """Projected multi-head attention: o(attn(q(x_q), k(x_kv), v(x_kv)))."""
    q = linear_forward(x_q, params, f"{name}.q")
    k = linear_forward(x_kv, params, f"{name}.k")
    v = linear_forward(x_kv, params, f"{name}.v")
    return linear_forward(T.attention_forward(q, k, v, heads), params, f"{name}.o")

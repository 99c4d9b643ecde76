"""
Building blocks shared by the encoders, fusion layers and decoder.

Weights are stored as (fan_in, fan_out) so a layer is `x @ W + b`. Blocks are
pre-norm residual: x + Attn(LN(x)) followed by x + FFN(LN(x)).
"""

import math
from typing import Sequence

import numpy as np

from coop_forecaster.Numerics import tensor as T
from coop_forecaster.Numerics.params import ParamScope
from coop_forecaster.Numerics.tensor import Tensor
from coop_forecaster.Utils.errors import EmptyAttentionError, ShapeError

LAYER_NORM_EPS = 1e-5


def declare_mlp(params: ParamScope, widths: Sequence[int]) -> None:
    for i, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
        params.linear(f"layer{i}", n_in, n_out)


def declare_layer_norm(params: ParamScope, d: int) -> None:
    params.ones("gamma", (d,))
    params.zeros("beta", (d,))


def declare_attention(params: ParamScope, d: int) -> None:
    for name in ("query", "key", "value", "out"):
        params.linear(name, d, d)


def declare_attention_block(params: ParamScope, d: int, ffn_hidden: int, cross: bool = False) -> None:
    declare_layer_norm(params.scope("norm_query"), d)
    if cross:
        declare_layer_norm(params.scope("norm_kv"), d)
    declare_attention(params.scope("attn"), d)
    declare_layer_norm(params.scope("norm_ffn"), d)
    declare_mlp(params.scope("ffn"), [d, ffn_hidden, d])


def linear(params: ParamScope, x: Tensor) -> Tensor:
    weight = params["weight"]
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"{params.prefix}: input width {x.shape[-1]} != {weight.shape[0]}")
    if x.ndim == 1:
        return T.reshape(T.reshape(x, (1, -1)) @ weight, (weight.shape[1],)) + params["bias"]
    return x @ weight + params["bias"]


def mlp_widths(params: ParamScope) -> list[int]:
    widths = []
    i = 0
    while f"layer{i}.weight" in params:
        weight = params[f"layer{i}.weight"]
        if not widths:
            widths.append(weight.shape[0])
        widths.append(weight.shape[1])
        i += 1
    return widths


def mlp_forward(params: ParamScope, x: Tensor, widths: Sequence[int] | None = None,
                activation: str = "relu") -> Tensor:
    """ReLU between layers, linear output layer."""
    widths = list(widths) if widths is not None else mlp_widths(params)
    if len(widths) < 2:
        raise ShapeError(f"{params.prefix}: an MLP needs at least two widths")
    if x.shape[-1] != widths[0]:
        raise ShapeError(f"{params.prefix}: input width {x.shape[-1]} != {widths[0]}")
    if activation != "relu":
        raise ShapeError(f"unsupported activation: {activation}")
    hidden = x
    n_layers = len(widths) - 1
    for i in range(n_layers):
        hidden = linear(params.scope(f"layer{i}"), hidden)
        if i < n_layers - 1:
            hidden = T.relu(hidden)
    return hidden


def layer_norm(params: ParamScope, x: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    centered = x - T.mean(x, axis=-1, keepdims=True)
    variance = T.mean(centered * centered, axis=-1, keepdims=True)
    normalized = centered * T.power(variance + eps, -0.5)
    return normalized * params["gamma"] + params["beta"]


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    *lead, steps, d = x.shape
    return T.swapaxes(T.reshape(x, (*lead, steps, n_heads, d // n_heads)), -3, -2)


def _merge_heads(x: Tensor) -> Tensor:
    *lead, n_heads, steps, head_dim = x.shape
    return T.reshape(T.swapaxes(x, -3, -2), (*lead, steps, n_heads * head_dim))


def mha_forward(params: ParamScope, query_seq: Tensor, kv_seq: Tensor, mask: np.ndarray,
                n_heads: int) -> Tensor:
    """
    Multi-head scaled dot-product attention.

    query_seq (..., Tq, d), kv_seq (..., Tk, d), mask broadcastable to
    (..., Tq, Tk) with True marking keys a query may attend to. Every query
    row needs at least one admissible key.
    """
    d = query_seq.shape[-1]
    if d % n_heads:
        raise ShapeError(f"hidden width {d} is not divisible by {n_heads} heads")
    if kv_seq.shape[-1] != d:
        raise ShapeError(f"key/value width {kv_seq.shape[-1]} != query width {d}")
    mask = np.asarray(mask, dtype=bool)
    if not mask.any(axis=-1).all():
        raise EmptyAttentionError(f"{params.prefix}: a query row has no admissible key")

    head_dim = d // n_heads
    query = _split_heads(linear(params.scope("query"), query_seq), n_heads)
    key = _split_heads(linear(params.scope("key"), kv_seq), n_heads)
    value = _split_heads(linear(params.scope("value"), kv_seq), n_heads)

    scores = (query @ T.swapaxes(key, -1, -2)) * (1.0 / math.sqrt(head_dim))
    weights = T.softmax(scores, axis=-1, mask=np.expand_dims(mask, -3))
    context = _merge_heads(weights @ value)
    return linear(params.scope("out"), context)


def self_attention_block(params: ParamScope, x: Tensor, mask: np.ndarray, n_heads: int,
                         layer_norm_enabled: bool = True) -> Tensor:
    hidden = layer_norm(params.scope("norm_query"), x) if layer_norm_enabled else x
    x = x + mha_forward(params.scope("attn"), hidden, hidden, mask, n_heads)
    hidden = layer_norm(params.scope("norm_ffn"), x) if layer_norm_enabled else x
    return x + mlp_forward(params.scope("ffn"), hidden)


def cross_attention_block(params: ParamScope, query: Tensor, kv: Tensor, mask: np.ndarray, n_heads: int,
                          layer_norm_enabled: bool = True) -> Tensor:
    if layer_norm_enabled:
        attended = mha_forward(params.scope("attn"), layer_norm(params.scope("norm_query"), query),
                               layer_norm(params.scope("norm_kv"), kv), mask, n_heads)
    else:
        attended = mha_forward(params.scope("attn"), query, kv, mask, n_heads)
    hidden = query + attended
    normed = layer_norm(params.scope("norm_ffn"), hidden) if layer_norm_enabled else hidden
    return hidden + mlp_forward(params.scope("ffn"), normed)

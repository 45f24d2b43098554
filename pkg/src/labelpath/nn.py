"""Neural building blocks shared by the encoder and fusion stacks.

Parameters are plain dicts of Tensors so they can be flattened into a
single named registry for the optimizer and the checkpoint writer.
"""

from __future__ import annotations

import math

import numpy as np

from .tensor import (
    MASK_VALUE,
    Tensor,
    add,
    bmm,
    concat,
    dropout,
    layer_norm,
    matmul,
    parameter,
    relu,
    reshape,
    scale,
    softmax_last_dim,
    transpose,
)


class ConfigError(ValueError):
    """A hyperparameter combination the layers cannot satisfy."""


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   dtype=np.float32) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)


def init_linear(rng, nin: int, nout: int, dtype=np.float32) -> dict:
    return {
        "w": parameter(xavier_uniform(rng, nin, nout, dtype)),
        "b": parameter(np.zeros(nout, dtype=dtype)),
    }


def linear(x: Tensor, p: dict) -> Tensor:
    return add(matmul(x, p["w"]), p["b"])


def init_layer_norm(width: int, dtype=np.float32) -> dict:
    return {
        "gamma": parameter(np.ones(width, dtype=dtype)),
        "beta": parameter(np.zeros(width, dtype=dtype)),
    }


def init_attention(rng, width: int, dtype=np.float32) -> dict:
    """Bias-free q/k/v/output projections, each width x width."""
    return {name: parameter(xavier_uniform(rng, width, width, dtype))
            for name in ("wq", "wk", "wv", "wo")}


def init_feed_forward(rng, width: int, mult: int = 4, dtype=np.float32) -> dict:
    return {
        "w1": parameter(xavier_uniform(rng, width, mult * width, dtype)),
        "b1": parameter(np.zeros(mult * width, dtype=dtype)),
        "w2": parameter(xavier_uniform(rng, mult * width, width, dtype)),
        "b2": parameter(np.zeros(width, dtype=dtype)),
    }


def feed_forward(x: Tensor, p: dict) -> Tensor:
    """Two-layer ReLU network applied row-wise."""
    return add(matmul(relu(add(matmul(x, p["w1"]), p["b1"])), p["w2"]), p["b2"])


def multi_head_attention(q: Tensor, k: Tensor, v: Tensor, p: dict,
                         heads: int, additive_mask: np.ndarray | None = None,
                         sink: list | None = None) -> Tensor:
    """Scaled dot-product attention with per-head splits of the projections.

    q is (s_q, width); k and v are (s_k, width). Width must divide evenly
    into heads; each head attends in width/heads dimensions with scale
    1/sqrt(width/heads). ``additive_mask`` broadcasts onto the (heads,
    s_q, s_k) score stack; ``sink``, when given, receives a copy of the
    (heads, s_q, s_k) attention weights.
    """
    width = q.shape[1]
    if width % heads != 0:
        raise ConfigError(f"width {width} not divisible by {heads} heads")
    dh = width // heads
    s_q, s_k = q.shape[0], k.shape[0]

    def split(x: Tensor, s: int) -> Tensor:
        # (s, width) -> (heads, s, dh)
        return transpose(reshape(x, (s, heads, dh)), (1, 0, 2))

    qh = split(matmul(q, p["wq"]), s_q)
    kh = split(matmul(k, p["wk"]), s_k)
    vh = split(matmul(v, p["wv"]), s_k)

    scores = scale(bmm(qh, transpose(kh, (0, 2, 1))), 1.0 / math.sqrt(dh))
    attn = softmax_last_dim(scores, additive_mask=additive_mask)
    if sink is not None:
        sink.append(attn.data.copy())
    ctx = bmm(attn, vh)  # (heads, s_q, dh)
    ctx = reshape(transpose(ctx, (1, 0, 2)), (s_q, width))
    return matmul(ctx, p["wo"])


def init_transformer_block(rng, width: int, mult: int = 4,
                           dtype=np.float32) -> dict:
    return {
        "attn": init_attention(rng, width, dtype),
        "ln1": init_layer_norm(width, dtype),
        "ffn": init_feed_forward(rng, width, mult, dtype),
        "ln2": init_layer_norm(width, dtype),
    }


def transformer_block(x: Tensor, p: dict, heads: int, *,
                      additive_mask: np.ndarray | None = None,
                      drop_rate: float = 0.0,
                      rng: np.random.Generator | None = None,
                      train: bool = False,
                      sink: list | None = None) -> Tensor:
    """Post-norm block: LN(x + MHA(x)) then LN(x + FFN(x)).

    Dropout sits after the attention output and after the FFN.
    """
    a = multi_head_attention(x, x, x, p["attn"], heads,
                             additive_mask=additive_mask, sink=sink)
    a = dropout(a, drop_rate, rng, train)
    x = layer_norm(add(x, a), p["ln1"]["gamma"], p["ln1"]["beta"])
    f = feed_forward(x, p["ffn"])
    f = dropout(f, drop_rate, rng, train)
    return layer_norm(add(x, f), p["ln2"]["gamma"], p["ln2"]["beta"])


def positional_encoding(length: int, width: int, dtype=np.float32) -> np.ndarray:
    """Sinusoidal table: pe[p, 2i] = sin(p/10000^(2i/width)), odd cols cos."""
    if length < 1:
        raise ConfigError("positional encoding length must be >= 1")
    if width % 2 != 0:
        raise ConfigError("positional encoding width must be even")
    pos = np.arange(length, dtype=np.float64)[:, None]
    i2 = np.arange(0, width, 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, i2 / width)
    pe = np.empty((length, width), dtype=np.float64)
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe.astype(dtype)


def key_padding_mask(real: np.ndarray, dtype=np.float32) -> np.ndarray | None:
    """Additive (1, 1, s) mask from a boolean keep-vector; None if all real."""
    if real.all():
        return None
    mask = np.where(real, 0.0, MASK_VALUE).astype(dtype)
    return mask[None, None, :]


def flatten_params(tree, prefix: str = "") -> dict:
    """Depth-first flatten of nested dicts/lists of Tensors to dotted names."""
    flat: dict[str, Tensor] = {}
    if isinstance(tree, Tensor):
        flat[prefix] = tree
    elif isinstance(tree, dict):
        for key, val in tree.items():
            name = f"{prefix}.{key}" if prefix else str(key)
            flat.update(flatten_params(val, name))
    elif isinstance(tree, (list, tuple)):
        for i, val in enumerate(tree):
            name = f"{prefix}.{i}" if prefix else str(i)
            flat.update(flatten_params(val, name))
    else:
        raise TypeError(f"unexpected parameter tree node: {type(tree)!r}")
    return flat

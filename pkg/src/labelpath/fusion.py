"""Attention fusion of the label-history stack with the document matrix.

Positions are added to the history rows once, then each block runs
unmasked self-attention over the history, cross-attention with the
history as queries and the document matrix as keys/values, and a
feed-forward layer; every sublayer is wrapped post-norm as
LN(x + sublayer(x)) with dropout on the sublayer output.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .tensor import Tensor, add, dropout, layer_norm


def build_params(rng: np.random.Generator, width: int, layers: int,
                 ffn_mult: int = 4, dtype=np.float32) -> dict:
    return {"layers": [{
        "self_attn": nn.init_attention(rng, width, dtype),
        "ln1": nn.init_layer_norm(width, dtype),
        "cross_attn": nn.init_attention(rng, width, dtype),
        "ln2": nn.init_layer_norm(width, dtype),
        "ffn": nn.init_feed_forward(rng, width, ffn_mult, dtype),
        "ln3": nn.init_layer_norm(width, dtype),
    } for _ in range(layers)]}


def fuse(history: Tensor, docs: Tensor, params: dict, heads: int, *,
         drop_rate: float = 0.0, rng: np.random.Generator | None = None,
         train: bool = False, sink: list | None = None) -> Tensor:
    """Fused state, same shape as ``history`` ((k, width))."""
    k, width = history.shape
    pe = nn.positional_encoding(k, width, history.dtype)
    x = add(history, Tensor(pe))
    for layer_no, p in enumerate(params["layers"]):
        maps: list = []
        a = nn.multi_head_attention(x, x, x, p["self_attn"], heads, sink=maps)
        a = dropout(a, drop_rate, rng, train)
        x = layer_norm(add(x, a), p["ln1"]["gamma"], p["ln1"]["beta"])
        c = nn.multi_head_attention(x, docs, docs, p["cross_attn"], heads,
                                    sink=maps)
        c = dropout(c, drop_rate, rng, train)
        x = layer_norm(add(x, c), p["ln2"]["gamma"], p["ln2"]["beta"])
        f = nn.feed_forward(x, p["ffn"])
        f = dropout(f, drop_rate, rng, train)
        x = layer_norm(add(x, f), p["ln3"]["gamma"], p["ln3"]["beta"])
        if sink is not None:
            sink.append({"stage": "fusion_self", "layer": layer_no,
                         "weights": maps[0]})
            sink.append({"stage": "fusion_cross", "layer": layer_no,
                         "weights": maps[1]})
    return x

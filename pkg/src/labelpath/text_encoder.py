"""Two-level transformer encoder over a proposal's typed documents.

Each layer runs a shared word-level transformer over every document,
collapses each document to one vector (flatten, fully-connected, add the
document's type token), and runs a document-level transformer over the
|T| collapsed vectors. The word stream carries across layers unchanged
by the document stream; the document stream's output rows become the
next layer's type tokens. Sinusoidal positions are added once, per
document, before the first layer.

Padded positions are masked out of word-level attention and their rows
are zeroed before the flatten, so trailing padding never influences the
output.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .corpus import DOC_TYPES, Vocab
from .tensor import Tensor, add, concat, embedding_lookup, mul, narrow, reshape


def _random_rows(rng, rows: int, width: int, dtype):
    import math

    from .tensor import parameter
    scale = 1.0 / math.sqrt(width)
    return parameter(rng.normal(0.0, scale, size=(rows, width)).astype(dtype))


def build_params(rng: np.random.Generator, width: int, layers: int,
                 type_lengths: dict[str, int], ffn_mult: int = 4,
                 share_fuse: bool = False, dtype=np.float32) -> dict:
    """Parameter tree for the encoder stack.

    ``share_fuse`` reuses one set of per-type collapse FCs across layers
    instead of layer-specific ones.
    """
    def fuse_fcs():
        return {t: nn.init_linear(rng, type_lengths[t] * width, width, dtype)
                for t in DOC_TYPES}

    params: dict = {"type_tokens": _random_rows(rng, len(DOC_TYPES), width, dtype)}
    if share_fuse:
        params["fuse"] = fuse_fcs()
    layer_list = []
    for _ in range(layers):
        entry = {
            "word": nn.init_transformer_block(rng, width, ffn_mult, dtype),
            "doc": nn.init_transformer_block(rng, width, ffn_mult, dtype),
        }
        if not share_fuse:
            entry["fuse"] = fuse_fcs()
        layer_list.append(entry)
    params["layers"] = layer_list
    return params


def encode(encoded_docs: dict[str, tuple], embedding: Tensor, params: dict,
           heads: int, *, drop_rate: float = 0.0,
           rng: np.random.Generator | None = None, train: bool = False,
           sink: list | None = None) -> Tensor:
    """Proposal matrix of shape (|T|, width), one row per document type.

    ``encoded_docs`` maps each document type to its (token index array,
    real-token mask) pair from the corpus encoder. ``sink`` collects
    attention maps as dicts tagged with stage/layer/doc_type.
    """
    width = embedding.shape[1]
    dtype = embedding.dtype

    streams: dict[str, Tensor] = {}
    masks: dict[str, np.ndarray | None] = {}
    zero_pad: dict[str, np.ndarray] = {}
    for t in DOC_TYPES:
        ids, real = encoded_docs[t]
        w = embedding_lookup(embedding, ids, frozen_rows=(Vocab.PAD,))
        pe = nn.positional_encoding(len(ids), width, dtype)
        streams[t] = add(w, Tensor(pe))
        masks[t] = nn.key_padding_mask(real, dtype)
        zero_pad[t] = real.astype(dtype)[:, None]

    doc_state = params["type_tokens"]
    shared_fuse = params.get("fuse")
    for layer_no, layer in enumerate(params["layers"]):
        fuse = shared_fuse if shared_fuse is not None else layer["fuse"]
        rows = []
        for i, t in enumerate(DOC_TYPES):
            attn_maps: list = []
            streams[t] = nn.transformer_block(
                streams[t], layer["word"], heads, additive_mask=masks[t],
                drop_rate=drop_rate, rng=rng, train=train, sink=attn_maps)
            if sink is not None:
                sink.append({"stage": "word", "layer": layer_no,
                             "doc_type": t, "weights": attn_maps[0]})
            kept = mul(streams[t], Tensor(zero_pad[t]))
            flat = reshape(kept, (1, kept.shape[0] * width))
            collapsed = nn.linear(flat, fuse[t])
            rows.append(add(collapsed, narrow(doc_state, 0, i, 1)))
        fused = concat(rows, axis=0)
        attn_maps = []
        doc_state = nn.transformer_block(
            fused, layer["doc"], heads, drop_rate=drop_rate, rng=rng,
            train=train, sink=attn_maps)
        if sink is not None:
            sink.append({"stage": "doc", "layer": layer_no,
                         "weights": attn_maps[0]})
    return doc_state

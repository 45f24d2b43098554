"""Straight-line numpy re-implementations used as test oracles.

Written independently of the package's tape machinery: plain arrays in,
plain arrays out, no abstraction. Parameter dicts are read via .data.
"""

import math

import numpy as np


def naive_attention(q, k, v, wq, wk, wv, wo, heads, mask=None):
    """Multi-head attention; mask is an additive (s_q, s_k) array."""
    h = q.shape[1]
    dh = h // heads
    qp, kp, vp = q @ wq, k @ wk, v @ wv
    outs = []
    for i in range(heads):
        sl = slice(i * dh, (i + 1) * dh)
        scores = qp[:, sl] @ kp[:, sl].T / math.sqrt(dh)
        if mask is not None:
            scores = scores + mask
        scores = scores - scores.max(axis=-1, keepdims=True)
        e = np.exp(scores)
        w = e / e.sum(axis=-1, keepdims=True)
        outs.append(w @ vp[:, sl])
    return np.concatenate(outs, axis=1) @ wo


def naive_layer_norm(x, gamma, beta, eps=1e-5):
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * gamma + beta


def naive_ffn(x, w1, b1, w2, b2):
    return np.maximum(0.0, x @ w1 + b1) @ w2 + b2


def naive_block(x, p, heads, mask=None):
    """Post-norm transformer block over a parameter dict of Tensors."""
    a = naive_attention(x, x, x, p["attn"]["wq"].data, p["attn"]["wk"].data,
                        p["attn"]["wv"].data, p["attn"]["wo"].data, heads,
                        mask)
    y = naive_layer_norm(x + a, p["ln1"]["gamma"].data, p["ln1"]["beta"].data)
    f = naive_ffn(y, p["ffn"]["w1"].data, p["ffn"]["b1"].data,
                  p["ffn"]["w2"].data, p["ffn"]["b2"].data)
    return naive_layer_norm(y + f, p["ln2"]["gamma"].data,
                            p["ln2"]["beta"].data)


def naive_positional_encoding(length, width):
    pos = np.arange(length, dtype=np.float64)[:, None]
    i2 = np.arange(0, width, 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, i2 / width)
    pe = np.empty((length, width))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe


def additive_mask(real):
    """(1, s) additive mask from a boolean keep-vector."""
    return np.where(real, 0.0, -1e9)[None, :]

"""Label-history embeddings via GCN passes over sampled neighborhoods.

For each already-decided level set, its members become central nodes of
a hop-limited subgraph of the discipline graph; graph convolutions over
the symmetrized, self-looped, degree-normalized adjacency propagate
neighborhood information, and the mean of the central rows becomes that
level's embedding. Node features are one learned global table shared by
every call.
"""

from __future__ import annotations

import numpy as np

from .intergraph import GraphError, InterGraph
from .tensor import Tensor, concat, embedding_lookup, matmul, parameter, relu, tmean

SYMMETRIZE_MODES = ("mean", "max", "out")


def build_params(rng: np.random.Generator, num_nodes: int, width: int,
                 layers: int, dtype=np.float32) -> dict:
    """One feature row per graph node plus per-layer weight matrices.

    Unit-scale features: the level embeddings these produce are summed
    with unit-amplitude positional encodings downstream, and must not
    vanish next to them.
    """
    from .nn import xavier_uniform
    return {
        "node_features": parameter(
            rng.normal(0.0, 1.0, size=(num_nodes, width)).astype(dtype)),
        "layers": [parameter(xavier_uniform(rng, width, width, dtype))
                   for _ in range(layers)],
    }


def sample_subgraph(centers, g: InterGraph, hops: int,
                    code_of: dict[int, str],
                    symmetrize: str = "mean") -> tuple[list[int], np.ndarray]:
    """Hop-limited BFS neighborhood with a symmetrized weight matrix.

    Node order is deterministic: centers first (sorted by code), then
    each BFS frontier sorted by code. Edge direction is collapsed per
    ``symmetrize``: mean or max of the two directions, or outgoing
    weights only.
    """
    if symmetrize not in SYMMETRIZE_MODES:
        raise GraphError(f"unknown symmetrize mode {symmetrize!r}")
    centers = sorted(set(centers), key=lambda n: code_of[n])
    if not centers:
        raise GraphError("subgraph sampling needs at least one center")
    for c in centers:
        if c not in g._nbrs:
            raise GraphError(f"center {code_of.get(c, c)} not in graph")
    order: list[int] = list(centers)
    seen = set(centers)
    frontier = centers
    for _ in range(hops):
        nxt = sorted({nbr for node in frontier for nbr in g.neighbors(node)}
                     - seen, key=lambda n: code_of[n])
        order.extend(nxt)
        seen.update(nxt)
        frontier = nxt
    n = len(order)
    adj = np.zeros((n, n), dtype=np.float64)
    for i, a in enumerate(order):
        for j, b in enumerate(order):
            if i == j:
                continue
            out_w = g.weight(a, b)
            in_w = g.weight(b, a)
            if symmetrize == "mean":
                adj[i, j] = 0.5 * (out_w + in_w)
            elif symmetrize == "max":
                adj[i, j] = max(out_w, in_w)
            else:
                adj[i, j] = out_w
    return order, adj


def normalized_adjacency(adj: np.ndarray, dtype=np.float32) -> np.ndarray:
    """Self-looped degree-normalized matrix D^-1/2 (A + I) D^-1/2."""
    bar = adj + np.eye(adj.shape[0])
    inv_sqrt = 1.0 / np.sqrt(bar.sum(axis=1))
    return (bar * inv_sqrt[:, None] * inv_sqrt[None, :]).astype(dtype)


def gcn_layer(adj_norm: np.ndarray, hidden: Tensor, weight: Tensor) -> Tensor:
    """ReLU(adj_norm @ hidden @ weight); adj_norm is a constant."""
    return relu(matmul(matmul(Tensor(adj_norm), hidden), weight))


def embed_level(level_set, g: InterGraph, params: dict,
                row_of: dict[int, int], code_of: dict[int, str],
                symmetrize: str = "mean",
                cache: dict | None = None) -> Tensor:
    """One (1, width) embedding for a set of same-level labels."""
    if not level_set:
        raise GraphError("cannot embed an empty level set")
    centers = sorted(set(level_set), key=lambda n: code_of[n])
    key = frozenset(centers)
    if cache is not None and key in cache:
        rows, adj_norm = cache[key]
    else:
        hops = len(params["layers"])
        order, adj = sample_subgraph(centers, g, hops, code_of, symmetrize)
        adj_norm = normalized_adjacency(adj, params["node_features"].dtype)
        rows = np.array([row_of[n] for n in order], dtype=np.int64)
        if cache is not None:
            cache[key] = (rows, adj_norm)
    hidden = embedding_lookup(params["node_features"], rows)
    for weight in params["layers"]:
        hidden = gcn_layer(adj_norm, hidden, weight)
    from .tensor import narrow
    return tmean(narrow(hidden, 0, 0, len(centers)), axis=0, keepdims=True)


def embed_history(level_sets, g: InterGraph, params: dict,
                  row_of: dict[int, int], code_of: dict[int, str],
                  symmetrize: str = "mean",
                  cache: dict | None = None,
                  result_cache: dict | None = None) -> Tensor:
    """Stack of per-level embeddings, one row per already-decided level.

    ``result_cache`` memoizes whole level embeddings keyed by the level
    set; valid only while the parameters stay fixed (one training step,
    or any stretch of inference), since cached rows share tape nodes.
    """
    rows = []
    for s in level_sets:
        key = frozenset(s)
        row = result_cache.get(key) if result_cache is not None else None
        if row is None:
            row = embed_level(s, g, params, row_of, code_of, symmetrize,
                              cache)
            if result_cache is not None:
                result_cache[key] = row
        rows.append(row)
    return rows[0] if len(rows) == 1 else concat(rows, axis=0)

"""End-to-end model: parameter registry, encoding, fusion, level heads."""

from __future__ import annotations

import numpy as np

from . import fusion, graph_encoder, text_encoder
from .config import Config
from .corpus import Proposal, Vocab, encode_proposal, random_embeddings
from .intergraph import InterGraph
from .nn import flatten_params, init_linear, linear
from .tensor import Tensor, narrow, parameter, relu, reshape, sigmoid


class Model:
    """Owns every trainable tensor plus the fixed corpus/graph context.

    Construction is deterministic under ``config.seed``: parameters are
    drawn in a fixed order from one generator, and the dropout stream
    uses a second, independent one.
    """

    def __init__(self, config: Config, taxonomy, vocab: Vocab,
                 graph: InterGraph, embedding_table: np.ndarray | None = None,
                 dtype=np.float32):
        config.validate()
        self.config = config
        self.taxonomy = taxonomy
        self.vocab = vocab
        self.graph = graph
        self.dtype = dtype

        init_rng = np.random.default_rng(config.seed)
        self.rng = np.random.default_rng(config.seed + 1)  # dropout stream

        width = config.hidden_size
        if embedding_table is None:
            embedding_table = random_embeddings(vocab, width, init_rng)
        if embedding_table.shape != (len(vocab), width):
            raise ValueError(
                f"embedding table shape {embedding_table.shape} != "
                f"({len(vocab)}, {width})")
        self.embedding = parameter(embedding_table.astype(dtype))

        self.text_params = text_encoder.build_params(
            init_rng, width, config.encoder_layers, config.type_lengths,
            config.ffn_mult, share_fuse=config.share_fuse_fc, dtype=dtype)
        node_ids = taxonomy.all_ids()
        self.node_row = {lid: i for i, lid in enumerate(node_ids)}
        self.graph_params = graph_encoder.build_params(
            init_rng, len(node_ids), width, config.graph_layers, dtype=dtype)
        self.fusion_params = fusion.build_params(
            init_rng, width, config.fusion_layers, config.ffn_mult, dtype=dtype)
        self.head_params = [
            {"hidden": init_linear(init_rng, width, width, dtype),
             "out": init_linear(init_rng, width, taxonomy.size_at(k) + 1, dtype)}
            for k in range(1, taxonomy.depth + 1)]

        self._params = flatten_params({
            "embedding": self.embedding,
            "text": self.text_params,
            "graph": self.graph_params,
            "fusion": self.fusion_params,
            "heads": self.head_params,
        })
        self._subgraph_cache: dict = {}

    def parameters(self) -> dict[str, Tensor]:
        return self._params

    # -- forward pieces -----------------------------------------------------

    def encode_documents(self, prop: Proposal, train: bool = False,
                         sink: list | None = None) -> Tensor:
        docs = encode_proposal(prop, self.vocab, self.config.type_lengths)
        return text_encoder.encode(
            docs, self.embedding, self.text_params, self.config.num_heads,
            drop_rate=self.config.dropout, rng=self.rng, train=train,
            sink=sink)

    def embed_history(self, level_sets,
                      result_cache: dict | None = None) -> Tensor:
        return graph_encoder.embed_history(
            level_sets, self.graph, self.graph_params, self.node_row,
            self.taxonomy.codes, symmetrize=self.config.graph_symmetrize,
            cache=self._subgraph_cache, result_cache=result_cache)

    def fuse(self, history: Tensor, docs: Tensor, train: bool = False,
             sink: list | None = None) -> Tensor:
        return fusion.fuse(history, docs, self.fusion_params,
                           self.config.num_heads,
                           drop_rate=self.config.dropout, rng=self.rng,
                           train=train, sink=sink)

    def level_probabilities(self, fused: Tensor, k: int) -> Tensor:
        """Sigmoid probabilities over |C_k|+1 slots from the last fused row."""
        if not 1 <= k <= self.taxonomy.depth:
            raise IndexError(f"level {k} outside 1..{self.taxonomy.depth}")
        pooled = narrow(fused, 0, fused.shape[0] - 1, 1)
        head = self.head_params[k - 1]
        logits = linear(relu(linear(pooled, head["hidden"])), head["out"])
        return sigmoid(reshape(logits, (logits.shape[1],)))

    def forward_level(self, docs_matrix: Tensor, prefix_sets, k: int,
                      train: bool = False, sink: list | None = None,
                      history_cache: dict | None = None) -> Tensor:
        """Level-k probability vector given the already-decided prefix."""
        history = self.embed_history(prefix_sets, result_cache=history_cache)
        fused = self.fuse(history, docs_matrix, train=train, sink=sink)
        return self.level_probabilities(fused, k)

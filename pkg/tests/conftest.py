"""Shared fixture factory: a tiny end-to-end world (corpus, graph, model)."""

import numpy as np

from labelpath.config import Config
from labelpath.corpus import SynthSpec, Vocab, synth_corpus
from labelpath.intergraph import build as build_graph
from labelpath.intergraph import collect_stats
from labelpath.model import Model

TINY_LENGTHS = {"title": 4, "keywords": 8, "abstract": 10, "research_field": 3}


def tiny_world(seed=0, n_train=12, n_test=4, branching=(3, 2), hidden=8,
               dropout=0.0, two_major_rate=0.25, learning_rate=1e-2,
               depth_weights=None, dtype=np.float32):
    """Small but complete setup: taxonomy, corpus, graph, vocab, model."""
    spec = SynthSpec(
        seed=seed, branching=branching, keywords_per_label=4, noise_tokens=10,
        doc_lengths=dict(TINY_LENGTHS), n_train=n_train, n_test=n_test,
        two_major_rate=two_major_rate,
        depth_weights=depth_weights or tuple(
            [0.3] + [0.7 / (len(branching) - 1)] * (len(branching) - 1)
            if len(branching) > 1 else [1.0]))
    taxonomy, train, test = synth_corpus(spec)
    stats, _ = collect_stats(train, taxonomy)
    graph = build_graph(stats, taxonomy)
    vocab = Vocab.build(train + test)
    config = Config(hidden_size=hidden, num_heads=2, encoder_layers=1,
                    fusion_layers=1, graph_layers=1, ffn_mult=2,
                    dropout=dropout, learning_rate=learning_rate,
                    weight_decay=1e-7, batch_size=4, warmup_steps=0,
                    threshold=0.5, seed=seed,
                    type_lengths=dict(TINY_LENGTHS))
    model = Model(config, taxonomy, vocab, graph, dtype=dtype)
    return {"spec": spec, "taxonomy": taxonomy, "train": train, "test": test,
            "graph": graph, "vocab": vocab, "config": config, "model": model}

"""Subgraph sampling, convolution math, and history embeddings."""

import numpy as np
import pytest

from labelpath import graph_encoder as ge
from labelpath import tensor as T
from labelpath.gradcheck import grad_check
from labelpath.intergraph import GraphError, InterGraph
from labelpath.nn import flatten_params
from labelpath.tensor import Tensor, parameter


def graph_of(codes, edges):
    """codes: list of node codes; edges: {(src, dst): weight} by code."""
    ids = {c: i for i, c in enumerate(codes)}
    return (InterGraph(nodes=list(ids.values()),
                       edges={(ids[a], ids[b]): w for (a, b), w in edges.items()}),
            ids, {i: c for c, i in ids.items()})


class TestSampleSubgraph:
    def test_isolated_center(self):
        g, ids, codes = graph_of(["a", "b"], {})
        nodes, adj = ge.sample_subgraph([ids["a"]], g, 1, codes)
        assert nodes == [ids["a"]]
        assert adj.shape == (1, 1) and adj[0, 0] == 0.0

    def test_star_one_hop(self):
        g, ids, codes = graph_of(["a", "b", "c"],
                                 {("a", "b"): 0.5, ("a", "c"): 0.25})
        nodes, adj = ge.sample_subgraph([ids["a"]], g, 1, codes)
        assert nodes == [ids["a"], ids["b"], ids["c"]]
        # directed weights averaged with their (absent) reverse
        assert adj[0, 1] == pytest.approx(0.25)
        assert adj[0, 2] == pytest.approx(0.125)
        assert (adj == adj.T).all()

    def test_path_hop_counts(self):
        g, ids, codes = graph_of(["a", "b", "c"],
                                 {("a", "b"): 1.0, ("b", "c"): 1.0})
        one, _ = ge.sample_subgraph([ids["a"]], g, 1, codes)
        two, _ = ge.sample_subgraph([ids["a"]], g, 2, codes)
        assert one == [ids["a"], ids["b"]]
        assert two == [ids["a"], ids["b"], ids["c"]]

    def test_deterministic_ordering(self):
        g, ids, codes = graph_of(["d", "c", "b", "a"],
                                 {("d", "c"): 0.1, ("d", "b"): 0.1,
                                  ("d", "a"): 0.1})
        nodes1, adj1 = ge.sample_subgraph([ids["d"]], g, 1, codes)
        nodes2, adj2 = ge.sample_subgraph([ids["d"]], g, 1, codes)
        assert nodes1 == nodes2
        np.testing.assert_array_equal(adj1, adj2)
        # frontier sorted by code
        assert [codes[n] for n in nodes1] == ["d", "a", "b", "c"]

    def test_missing_center_rejected(self):
        g, ids, codes = graph_of(["a"], {})
        with pytest.raises(GraphError):
            ge.sample_subgraph([99], g, 1, {99: "zz", **codes})

    def test_symmetrize_modes(self):
        g, ids, codes = graph_of(["a", "b"], {("a", "b"): 0.8, ("b", "a"): 0.2})
        _, mean_adj = ge.sample_subgraph([ids["a"]], g, 1, codes, "mean")
        _, max_adj = ge.sample_subgraph([ids["a"]], g, 1, codes, "max")
        _, out_adj = ge.sample_subgraph([ids["a"]], g, 1, codes, "out")
        assert mean_adj[0, 1] == pytest.approx(0.5)
        assert max_adj[0, 1] == pytest.approx(0.8)
        assert out_adj[0, 1] == pytest.approx(0.8)
        assert out_adj[1, 0] == pytest.approx(0.2)


class TestGcnLayer:
    def test_single_node_identity_weight(self):
        h = np.array([[1.0, -2.0, 3.0]])
        out = ge.gcn_layer(ge.normalized_adjacency(np.zeros((1, 1))),
                           Tensor(h), Tensor(np.eye(3)))
        np.testing.assert_allclose(out.data, [[1.0, 0.0, 3.0]])

    def test_two_node_unit_edge_fixture(self):
        adj = np.array([[0.0, 1.0], [1.0, 0.0]])
        out = ge.gcn_layer(ge.normalized_adjacency(adj),
                           Tensor(np.eye(2)), Tensor(np.eye(2)))
        np.testing.assert_allclose(out.data, [[0.5, 0.5], [0.5, 0.5]],
                                   atol=1e-6)

    def test_negative_preactivations_clipped(self):
        h = np.array([[-5.0, 2.0]])
        out = ge.gcn_layer(ge.normalized_adjacency(np.zeros((1, 1))),
                           Tensor(h), Tensor(np.eye(2)))
        assert (out.data >= 0).all()

    def test_matches_dense_closed_form_random(self):
        rng = np.random.default_rng(8)
        for trial in range(10):
            n = int(rng.integers(2, 9))
            width = int(rng.integers(2, 6))
            raw = rng.uniform(0, 1, size=(n, n))
            adj = np.triu(raw, 1)
            adj = adj + adj.T
            feats = rng.normal(size=(n, width))
            weight = rng.normal(size=(width, width))
            out = ge.gcn_layer(ge.normalized_adjacency(adj, np.float64),
                               Tensor(feats), Tensor(weight))
            bar = adj + np.eye(n)
            dinv = np.diag(1.0 / np.sqrt(bar.sum(axis=1)))
            expected = np.maximum(0.0, dinv @ bar @ dinv @ feats @ weight)
            np.testing.assert_allclose(out.data, expected, atol=1e-6)


class TestEmbedLevel:
    def _params(self, num_nodes, width, layers, seed=0):
        return ge.build_params(np.random.default_rng(seed), num_nodes, width,
                               layers, dtype=np.float64)

    def test_isolated_single_center_identity_weight(self):
        g, ids, codes = graph_of(["a", "b"], {})
        params = self._params(2, 3, 1)
        params["layers"][0] = parameter(np.eye(3))
        row_of = {ids["a"]: 0, ids["b"]: 1}
        out = ge.embed_level({ids["a"]}, g, params, row_of, codes)
        expected = np.maximum(0.0, params["node_features"].data[0])
        np.testing.assert_allclose(out.data, [expected], atol=1e-12)

    def test_two_identical_centers_mean_equals_each(self):
        g, ids, codes = graph_of(["a", "b"], {})
        params = self._params(2, 3, 1)
        params["node_features"].data[1] = params["node_features"].data[0]
        row_of = {ids["a"]: 0, ids["b"]: 1}
        single = ge.embed_level({ids["a"]}, g, params, row_of, codes)
        both = ge.embed_level({ids["a"], ids["b"]}, g, params, row_of, codes)
        np.testing.assert_allclose(both.data, single.data, atol=1e-12)

    def test_three_node_fixture_vs_dense_oracle(self):
        g, ids, codes = graph_of(["a", "b", "c"],
                                 {("a", "b"): 0.6, ("b", "a"): 0.2,
                                  ("b", "c"): 1.0})
        params = self._params(3, 4, 2, seed=5)
        row_of = {ids[c]: i for i, c in enumerate(["a", "b", "c"])}
        out = ge.embed_level({ids["a"]}, g, params, row_of, codes)

        order, adj = ge.sample_subgraph([ids["a"]], g, 2, codes)
        bar = adj + np.eye(len(order))
        dinv = np.diag(1.0 / np.sqrt(bar.sum(axis=1)))
        hidden = params["node_features"].data[[row_of[n] for n in order]]
        for w in params["layers"]:
            hidden = np.maximum(0.0, dinv @ bar @ dinv @ hidden @ w.data)
        np.testing.assert_allclose(out.data, hidden[:1], atol=1e-6)

    def test_invariant_to_non_central_order(self):
        g, ids, codes = graph_of(["a", "b", "c", "d"],
                                 {("a", "b"): 0.3, ("a", "c"): 0.7,
                                  ("a", "d"): 0.5, ("c", "d"): 0.9})
        params = self._params(4, 4, 1, seed=2)
        row_of = {ids[c]: i for i, c in enumerate(["a", "b", "c", "d"])}
        out = ge.embed_level({ids["a"]}, g, params, row_of, codes)

        order, adj = ge.sample_subgraph([ids["a"]], g, 1, codes)
        for perm_seed in range(5):
            rng = np.random.default_rng(perm_seed)
            tail = np.arange(1, len(order))
            rng.shuffle(tail)
            perm = np.concatenate([[0], tail])
            order_p = [order[i] for i in perm]
            adj_p = adj[np.ix_(perm, perm)]
            bar = adj_p + np.eye(len(order_p))
            dinv = np.diag(1.0 / np.sqrt(bar.sum(axis=1)))
            hidden = params["node_features"].data[
                [row_of[n] for n in order_p]]
            for w in params["layers"]:
                hidden = np.maximum(0.0, dinv @ bar @ dinv @ hidden @ w.data)
            np.testing.assert_allclose(hidden[:1], out.data, atol=1e-10)

    def test_empty_level_rejected(self):
        g, ids, codes = graph_of(["a"], {})
        params = self._params(1, 3, 1)
        with pytest.raises(GraphError):
            ge.embed_level(set(), g, params, {ids["a"]: 0}, codes)


class TestEmbedHistory:
    def test_rows_match_per_level_calls(self):
        g, ids, codes = graph_of(["root", "a", "b"],
                                 {("a", "b"): 0.4, ("b", "a"): 0.1})
        params = ge.build_params(np.random.default_rng(1), 3, 4, 1,
                                 dtype=np.float64)
        row_of = {ids[c]: i for i, c in enumerate(["root", "a", "b"])}
        levels = [{ids["root"]}, {ids["a"], ids["b"]}, {ids["b"]}]
        hist = ge.embed_history(levels, g, params, row_of, codes)
        assert hist.shape == (3, 4)
        for i, level in enumerate(levels):
            row = ge.embed_level(level, g, params, row_of, codes)
            np.testing.assert_allclose(hist.data[i], row.data[0], atol=1e-12)

    def test_single_level_history(self):
        g, ids, codes = graph_of(["root"], {})
        params = ge.build_params(np.random.default_rng(1), 1, 4, 1,
                                 dtype=np.float64)
        hist = ge.embed_history([{ids["root"]}], g, params,
                                {ids["root"]: 0}, codes)
        assert hist.shape == (1, 4)

    def test_gradients_through_history(self):
        g, ids, codes = graph_of(["root", "a", "b"],
                                 {("a", "b"): 0.4, ("b", "a"): 0.1})
        params = ge.build_params(np.random.default_rng(1), 3, 4, 2,
                                 dtype=np.float64)
        row_of = {ids[c]: i for i, c in enumerate(["root", "a", "b"])}
        levels = [{ids["root"]}, {ids["a"], ids["b"]}]
        probe = np.random.default_rng(0).normal(size=(2, 4))

        def f():
            hist = ge.embed_history(levels, g, params, row_of, codes)
            return T.tsum(T.mul(hist, T.Tensor(probe)))

        err = grad_check(f, flatten_params(params),
                         rng=np.random.default_rng(0))
        assert err < 1e-4, err

    def test_cache_reuse_gives_identical_results(self):
        g, ids, codes = graph_of(["root", "a"], {})
        params = ge.build_params(np.random.default_rng(1), 2, 4, 1,
                                 dtype=np.float64)
        row_of = {ids["root"]: 0, ids["a"]: 1}
        cache = {}
        first = ge.embed_level({ids["a"]}, g, params, row_of, codes,
                               cache=cache)
        second = ge.embed_level({ids["a"]}, g, params, row_of, codes,
                                cache=cache)
        assert len(cache) == 1
        np.testing.assert_array_equal(first.data, second.data)

"""Finite-difference verification of every differentiable layer type."""

import numpy as np

from labelpath import nn
from labelpath import tensor as T
from labelpath.gradcheck import grad_check


def test_linear_layer_exact():
    rng = np.random.default_rng(0)
    p = nn.init_linear(rng, 5, 3, dtype=np.float64)
    x = T.Tensor(rng.normal(size=(4, 5)))

    def f():
        return T.tsum(nn.linear(x, p))

    assert grad_check(f, nn.flatten_params(p), rng=rng) < 1e-6


def test_layer_norm_over_seeds():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        h = int(rng.integers(2, 9))
        rows = int(rng.integers(1, 5))
        gamma = T.parameter(rng.normal(size=h))
        beta = T.parameter(rng.normal(size=h))
        x = T.parameter(rng.normal(size=(rows, h)))

        def f():
            return T.tsum(T.mul(T.layer_norm(x, gamma, beta),
                                T.Tensor(rng_fixed)))

        rng_fixed = np.random.default_rng(seed + 100).normal(size=(rows, h))
        err = grad_check(f, {"x": x, "gamma": gamma, "beta": beta},
                         rng=np.random.default_rng(seed))
        assert err < 1e-4, f"seed {seed}: {err}"


def test_attention_composite_over_seeds():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        heads = int(rng.choice([1, 2]))
        h = heads * int(rng.integers(2, 4))
        s = int(rng.integers(1, 5))
        p = nn.init_attention(rng, h, dtype=np.float64)
        ln = nn.init_layer_norm(h, dtype=np.float64)
        x = T.parameter(rng.normal(size=(s, h)))
        probe = np.random.default_rng(seed + 500).normal(size=(s, h))

        def f():
            a = nn.multi_head_attention(x, x, x, p, heads)
            y = T.layer_norm(T.add(x, a), ln["gamma"], ln["beta"])
            return T.tsum(T.mul(y, T.Tensor(probe)))

        params = nn.flatten_params({"attn": p, "ln": ln, "x": x})
        err = grad_check(f, params, rng=np.random.default_rng(seed))
        assert err < 1e-4, f"seed {seed}: {err}"


def test_transformer_block_gradients():
    rng = np.random.default_rng(42)
    p = nn.init_transformer_block(rng, 4, dtype=np.float64)
    x = T.parameter(rng.normal(size=(3, 4)))
    probe = rng.normal(size=(3, 4))

    def f():
        return T.tsum(T.mul(nn.transformer_block(x, p, heads=2), T.Tensor(probe)))

    params = nn.flatten_params({"blk": p, "x": x})
    assert grad_check(f, params, rng=rng) < 1e-4

"""Adam update math and the warm-up schedule."""

import numpy as np
import pytest

from labelpath import tensor as T
from labelpath.optim import Adam
from labelpath.tensor import NumericError


def test_zero_grad_zero_decay_leaves_params():
    p = T.parameter(np.array([1.0, 2.0], dtype=np.float32))
    opt = Adam({"p": p}, lr=1e-3)
    p.grad = np.zeros(2, dtype=np.float32)
    opt.step()
    np.testing.assert_array_equal(p.data, [1.0, 2.0])


def test_first_step_moves_by_lr():
    # bias correction makes the very first step have magnitude ~lr
    p = T.parameter(np.array([0.0]))
    opt = Adam({"p": p}, lr=1e-3)
    p.grad = np.array([1.0])
    opt.step()
    np.testing.assert_allclose(p.data, [-1e-3], rtol=1e-6)
    assert opt.step_count == 1


def test_repeated_grads_move_monotonically():
    p = T.parameter(np.array([0.5]))
    opt = Adam({"p": p}, lr=1e-2)
    prev = p.data.copy()
    for _ in range(5):
        p.grad = np.array([1.0])
        opt.step()
        assert p.data[0] < prev[0]
        prev = p.data.copy()


def test_nan_grad_refuses_update():
    p = T.parameter(np.array([1.0]))
    opt = Adam({"p": p}, lr=1e-3)
    p.grad = np.array([np.nan])
    with pytest.raises(NumericError):
        opt.step()
    assert opt.step_count == 0
    np.testing.assert_array_equal(p.data, [1.0])


def test_weight_decay_pulls_toward_zero():
    p = T.parameter(np.array([10.0]))
    opt = Adam({"p": p}, lr=1e-2, weight_decay=0.1)
    for _ in range(20):
        p.grad = np.array([0.0])
        opt.step()
    assert 0 < p.data[0] < 10.0


def test_warmup_ramps_linearly_then_constant():
    p = T.parameter(np.array([0.0]))
    opt = Adam({"p": p}, lr=1.0, warmup=10)
    assert opt.lr_at(0) == pytest.approx(0.1)
    assert opt.lr_at(4) == pytest.approx(0.5)
    assert opt.lr_at(9) == pytest.approx(1.0)
    assert opt.lr_at(10) == 1.0
    assert opt.lr_at(500) == 1.0


def test_invalid_lr_rejected():
    with pytest.raises(ValueError):
        Adam({}, lr=0.0)

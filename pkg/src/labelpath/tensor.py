"""Dense tensors with reverse-mode automatic differentiation.

numpy owns the array math; this module owns the tape. Every operation
records its parent tensors and a backward closure, and ``backward()``
replays the closures in reverse topological order, accumulating into
``.grad`` arrays. float32 is the training dtype; the gradient checker
runs everything in float64.
"""

from __future__ import annotations

import contextlib

import numpy as np

# Additive attention-mask value. Large enough that exp() underflows to
# exactly 0 after max-subtraction in both float32 and float64.
MASK_VALUE = -1e9


class DimensionError(ValueError):
    """Shapes of the operands do not admit the requested operation."""


class NumericError(ArithmeticError):
    """A value left the finite range (NaN/Inf is an error state)."""


_grad_enabled = True
_strict_finite = False


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def set_strict_finite(flag: bool) -> None:
    """When on, every op output is checked for NaN/Inf (slow; for tests)."""
    global _strict_finite
    _strict_finite = bool(flag)


class Tensor:
    """A numpy array plus an optional gradient slot and tape linkage."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = ()
        self._backward = None

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        """Fast construction for op outputs (already float ndarrays)."""
        out = cls.__new__(cls)
        out.data = arr
        out.requires_grad = False
        out.grad = None
        out._parents = ()
        out._backward = None
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Reverse-mode pass from a scalar; accumulates into .grad slots."""
        if self.data.size != 1:
            raise DimensionError("backward() requires a scalar tensor")
        order = _topo_order(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)
                # Graph interiors are single-use; free them eagerly.
                node._backward = None
                node._parents = ()

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def parameter(data, name: str | None = None) -> Tensor:
    """Trainable tensor (requires_grad on); name is kept by the caller."""
    del name
    return Tensor(np.array(data), requires_grad=True)


def _topo_order(root: Tensor) -> list:
    """Iterative DFS post-order over the tape (graphs can be deep)."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        # copy: g may be a view or alias another node's grad buffer
        t.grad = np.array(g, dtype=t.data.dtype, copy=True)
    else:
        t.grad += g


def _make(data: np.ndarray, parents, backward_fn) -> Tensor:
    if _strict_finite and not np.isfinite(data).all():
        raise NumericError("non-finite value produced by an operation")
    out = Tensor._wrap(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back to the shape it was broadcast from."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] > 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# Elementwise and shape ops
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), backward)


def sub(a, b) -> Tensor:
    return add(a, neg(_as_tensor(b)))


def neg(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        _accumulate(a, -g)

    return _make(-a.data, (a,), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), backward)


def scale(a, s: float) -> Tensor:
    a = _as_tensor(a)
    s = float(s)

    def backward(g):
        _accumulate(a, g * s)

    return _make(a.data * s, (a,), backward)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0

    def backward(g):
        _accumulate(a, g * mask)

    return _make(a.data * mask, (a,), backward)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    x = a.data
    # Split form avoids overflow in exp for large |x|.
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                 np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    y = y.astype(x.dtype, copy=False)

    def backward(g):
        _accumulate(a, g * y * (1.0 - y))

    return _make(y, (a,), backward)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    old = a.data.shape

    def backward(g):
        _accumulate(a, g.reshape(old))

    return _make(a.data.reshape(shape), (a,), backward)


_INVERSE_PERMS: dict[tuple, tuple] = {}


def transpose(a, axes=None) -> Tensor:
    a = _as_tensor(a)
    if axes is None:
        if a.ndim != 2:
            raise DimensionError("transpose() without axes requires a 2-D tensor")
        perm = (1, 0)
    else:
        perm = tuple(axes)
    inv = _INVERSE_PERMS.get(perm)
    if inv is None:
        inv = tuple(int(i) for i in np.argsort(perm))
        _INVERSE_PERMS[perm] = inv

    def backward(g):
        _accumulate(a, np.transpose(g, inv))

    return _make(np.transpose(a.data, perm), (a,), backward)


def narrow(a, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice [start, start+length) along one axis."""
    a = _as_tensor(a)
    if start < 0 or start + length > a.data.shape[axis]:
        raise DimensionError(
            f"narrow range [{start}, {start + length}) outside extent "
            f"{a.data.shape[axis]}")
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[idx] = g
            _accumulate(a, full)

    return _make(a.data[idx].copy(), (a,), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                _accumulate(t, g[tuple(idx)])

    return _make(np.concatenate([t.data for t in tensors], axis=axis),
                 tuple(tensors), backward)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    shape = a.data.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, shape).copy())

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    shape = a.data.shape
    n = a.data.size if axis is None else shape[axis]

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, shape) / n)

    return _make(a.data.mean(axis=axis, keepdims=keepdims), (a,), backward)


# ---------------------------------------------------------------------------
# Matrix products
# ---------------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError("matmul requires 2-D operands")
    if a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            f"matmul inner extents differ: {a.data.shape} x {b.data.shape}")

    def backward(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _make(a.data @ b.data, (a, b), backward)


def bmm(a, b) -> Tensor:
    """Stacked matmul: (n, p, q) @ (n, q, r) -> (n, p, r)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 3 or b.ndim != 3:
        raise DimensionError("bmm requires 3-D operands")
    if a.data.shape[0] != b.data.shape[0] or a.data.shape[2] != b.data.shape[1]:
        raise DimensionError(
            f"bmm extents differ: {a.data.shape} x {b.data.shape}")

    def backward(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.transpose(0, 2, 1))
        if b.requires_grad:
            _accumulate(b, a.data.transpose(0, 2, 1) @ g)

    return _make(a.data @ b.data, (a, b), backward)


# ---------------------------------------------------------------------------
# Softmax / layer norm / dropout / lookups / loss
# ---------------------------------------------------------------------------


def softmax_last_dim(a, additive_mask=None) -> Tensor:
    """Numerically-stabilized softmax over the last axis.

    ``additive_mask`` is a constant array broadcastable onto the logits;
    masked positions carry ``MASK_VALUE``.
    """
    a = _as_tensor(a)
    if a.data.size == 0 or a.data.shape[-1] < 1:
        raise DimensionError("softmax over an empty last axis")
    z = a.data + additive_mask if additive_mask is not None else a.data
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    y = y.astype(a.dtype, copy=False)

    def backward(g):
        inner = (g * y).sum(axis=-1, keepdims=True)
        _accumulate(a, y * (g - inner))

    return _make(y, (a,), backward)


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Row-wise normalization over the last axis, then affine."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    if x.ndim != 2:
        raise DimensionError("layer_norm expects a 2-D (rows x width) tensor")
    h = x.data.shape[1]
    if h < 2:
        raise DimensionError("layer_norm width must be >= 2")
    mu = x.data.mean(axis=1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        if gamma.requires_grad:
            _accumulate(gamma, (g * xhat).sum(axis=0))
        if beta.requires_grad:
            _accumulate(beta, g.sum(axis=0))
        if x.requires_grad:
            gx = g * gamma.data
            # d/dx of (x - mu) / sqrt(var + eps), var biased over width h
            term = gx - gx.mean(axis=1, keepdims=True) \
                - xhat * (gx * xhat).mean(axis=1, keepdims=True)
            _accumulate(x, term * inv)

    return _make(out, (x, gamma, beta), backward)


def dropout(a, rate: float, rng: np.random.Generator | None,
            train: bool) -> Tensor:
    """Inverted dropout: surviving entries scaled by 1/(1-rate) in train mode."""
    a = _as_tensor(a)
    if not train or rate == 0.0:
        return a
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate {rate} outside [0, 1)")
    if rng is None:
        raise ValueError("train-mode dropout needs a random generator")
    keep = (rng.random(a.data.shape) >= rate) / (1.0 - rate)
    keep = keep.astype(a.dtype, copy=False)

    def backward(g):
        _accumulate(a, g * keep)

    return _make(a.data * keep, (a,), backward)


def embedding_lookup(table, indices, frozen_rows=()) -> Tensor:
    """Gather rows of ``table``; grads never flow into ``frozen_rows``."""
    table = _as_tensor(table)
    idx = np.asarray(indices, dtype=np.int64)

    def backward(g):
        if not table.requires_grad:
            return
        if frozen_rows:
            drop = np.isin(idx, frozen_rows)
            if drop.any():
                g = g * ~drop[:, None]
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, idx, g)

    return _make(table.data[idx], (table,), backward)


def binary_cross_entropy(probs, targets, eps: float = 1e-12) -> Tensor:
    """Summed BCE of probabilities against 0/1 targets, logs clamped at eps.

    Internally evaluated in float64: a 1e-12 clamp is below float32
    resolution near 1, where saturated sigmoids would otherwise produce
    log(0).
    """
    probs = _as_tensor(probs)
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != probs.data.shape:
        raise DimensionError(
            f"target shape {y.shape} != probability shape {probs.data.shape}")
    p = np.clip(probs.data.astype(np.float64), eps, 1.0 - eps)
    loss = -(y * np.log(p) + (1.0 - y) * np.log1p(-p)).sum()

    def backward(g):
        _accumulate(probs, (g * (p - y) / (p * (1.0 - p))).astype(probs.dtype))

    return _make(np.asarray(loss, dtype=probs.dtype), (probs,), backward)

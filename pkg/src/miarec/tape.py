"""Minimal reverse-mode autodiff over numpy float64 arrays.

Each operation returns a :class:`Var` holding its value plus a closure that
routes the upstream gradient to its parents. ``backward(loss)`` walks the
graph once in reverse topological order. Only the handful of operations the
model needs are implemented; every one is verified against the
finite-difference oracle in the test suite.

Broadcasting in ``add``/``mul``/``sub`` follows numpy; gradients for
broadcast operands are summed back to the operand's shape.
"""

import numpy as np


class Var:
    __slots__ = ("value", "grad", "parents", "backward_fn", "requires_grad")

    def __init__(self, value, parents=(), backward_fn=None, requires_grad=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape}, requires_grad={self.requires_grad})"


def param(value):
    """Leaf variable whose gradient will be accumulated."""
    return Var(value, requires_grad=True)


def const(value):
    """Leaf variable treated as a constant."""
    return Var(value)


def _as_var(x):
    return x if isinstance(x, Var) else const(x)


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _accumulate(var, grad):
    if not var.requires_grad:
        return
    if var.grad is None:
        var.grad = np.zeros_like(var.value)
    var.grad += grad


def add(a, b):
    a, b = _as_var(a), _as_var(b)
    out = Var(a.value + b.value, parents=(a, b))

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.value.shape))
        _accumulate(b, _unbroadcast(g, b.value.shape))

    out.backward_fn = bwd
    return out


def sub(a, b):
    a, b = _as_var(a), _as_var(b)
    out = Var(a.value - b.value, parents=(a, b))

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.value.shape))
        _accumulate(b, _unbroadcast(-g, b.value.shape))

    out.backward_fn = bwd
    return out


def mul(a, b):
    a, b = _as_var(a), _as_var(b)
    out = Var(a.value * b.value, parents=(a, b))

    def bwd(g):
        _accumulate(a, _unbroadcast(g * b.value, a.value.shape))
        _accumulate(b, _unbroadcast(g * a.value, b.value.shape))

    out.backward_fn = bwd
    return out


def matmul(a, b):
    a, b = _as_var(a), _as_var(b)
    out = Var(a.value @ b.value, parents=(a, b))

    def bwd(g):
        _accumulate(a, g @ b.value.T)
        _accumulate(b, a.value.T @ g)

    out.backward_fn = bwd
    return out


def transpose(a):
    a = _as_var(a)
    out = Var(a.value.T, parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, g.T)
    return out


def reshape(a, shape):
    a = _as_var(a)
    out = Var(a.value.reshape(shape), parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, g.reshape(a.value.shape))
    return out


def relu(a):
    a = _as_var(a)
    mask = a.value > 0
    out = Var(np.where(mask, a.value, 0.0), parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, g * mask)
    return out


def leaky_relu(a, slope=0.2):
    a = _as_var(a)
    mask = a.value > 0
    out = Var(np.where(mask, a.value, slope * a.value), parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, g * np.where(mask, 1.0, slope))
    return out


def tanh(a):
    a = _as_var(a)
    t = np.tanh(a.value)
    out = Var(t, parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, g * (1.0 - t * t))
    return out


def log_sigmoid(a):
    """Numerically stable log(sigmoid(x)) = min(x, 0) - log1p(exp(-|x|))."""
    a = _as_var(a)
    x = a.value
    out = Var(np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x))), parents=(a,))

    def bwd(g):
        # d/dx log sigmoid(x) = sigmoid(-x)
        sig_neg = np.empty_like(x)
        pos = x >= 0
        sig_neg[pos] = np.exp(-x[pos]) / (1.0 + np.exp(-x[pos]))
        sig_neg[~pos] = 1.0 / (1.0 + np.exp(x[~pos]))
        _accumulate(a, g * sig_neg)

    out.backward_fn = bwd
    return out


def exp(a):
    a = _as_var(a)
    value = np.exp(a.value)
    out = Var(value, parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, g * value)
    return out


def divide(a, b):
    a, b = _as_var(a), _as_var(b)
    out = Var(a.value / b.value, parents=(a, b))

    def bwd(g):
        _accumulate(a, _unbroadcast(g / b.value, a.value.shape))
        _accumulate(b, _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape))

    out.backward_fn = bwd
    return out


def softmax_rows(a):
    """Row-wise softmax; the max shift is detached, which is exact."""
    a = _as_var(a)
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = Var(y, parents=(a,))

    def bwd(g):
        dot = np.sum(g * y, axis=1, keepdims=True)
        _accumulate(a, y * (g - dot))

    out.backward_fn = bwd
    return out


def sum_all(a):
    a = _as_var(a)
    out = Var(np.asarray(a.value.sum()), parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, np.broadcast_to(g, a.value.shape).copy())
    return out


def sum_axis(a, axis, keepdims=False):
    a = _as_var(a)
    out = Var(a.value.sum(axis=axis, keepdims=keepdims), parents=(a,))

    def bwd(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.value.shape).copy())

    out.backward_fn = bwd
    return out


def gather_rows(a, indices):
    a = _as_var(a)
    idx = np.asarray(indices, dtype=np.intp)
    out = Var(a.value[idx], parents=(a,))

    def bwd(g):
        if a.requires_grad:
            acc = np.zeros_like(a.value)
            np.add.at(acc, idx, g)
            _accumulate(a, acc)

    out.backward_fn = bwd
    return out


def segment_sum(a, segment_ids, n_segments):
    """Sum rows of ``a`` into ``n_segments`` buckets; empty buckets stay zero."""
    a = _as_var(a)
    seg = np.asarray(segment_ids, dtype=np.intp)
    value = np.zeros((n_segments,) + a.value.shape[1:])
    np.add.at(value, seg, a.value)
    out = Var(value, parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, g[seg])
    return out


def column(a, j):
    """Column ``j`` as an (n, 1) variable."""
    a = _as_var(a)
    out = Var(a.value[:, j : j + 1], parents=(a,))

    def bwd(g):
        if a.requires_grad:
            acc = np.zeros_like(a.value)
            acc[:, j : j + 1] = g
            _accumulate(a, acc)

    out.backward_fn = bwd
    return out


def concat_cols(parts):
    parts = [_as_var(p) for p in parts]
    widths = [p.value.shape[1] for p in parts]
    out = Var(np.concatenate([p.value for p in parts], axis=1), parents=tuple(parts))

    def bwd(g):
        offset = 0
        for p, w in zip(parts, widths):
            _accumulate(p, g[:, offset : offset + w])
            offset += w

    out.backward_fn = bwd
    return out


def vstack(rows):
    """Stack 1-d variables of width d into an (n, d) variable."""
    rows = [_as_var(r) for r in rows]
    out = Var(np.stack([r.value for r in rows], axis=0), parents=tuple(rows))

    def bwd(g):
        for i, r in enumerate(rows):
            _accumulate(r, g[i])

    out.backward_fn = bwd
    return out


def sum_squares(a):
    a = _as_var(a)
    out = Var(np.asarray(np.sum(a.value * a.value)), parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, 2.0 * g * a.value)
    return out


def scale(a, factor):
    a = _as_var(a)
    out = Var(a.value * factor, parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, g * factor)
    return out


def zeros(shape):
    return const(np.zeros(shape))


def backward(loss):
    """Accumulate gradients of a scalar ``loss`` into its graph's leaves."""
    if loss.value.size != 1:
        raise ValueError(f"backward expects a scalar, got shape {loss.value.shape}")
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded:
            seen.add(id(node))
            order.append(node)
            continue
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad)

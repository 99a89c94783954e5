"""Minimal reverse-mode automatic differentiation over numpy arrays.

Each op returns a new :class:`Tensor` holding references to its inputs and a
closure that maps the output gradient to input gradients.  ``backward`` walks
the graph in reverse topological order.  Everything is float64.
"""
from __future__ import annotations

import numpy as np

LOG_CLAMP = 1e-12


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, parents=(), backward=None, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=float)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents if self.requires_grad else ()
        self._backward = backward if self.requires_grad else None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.shape}, name={self.name})"

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def parameter(data, name=None):
    return Tensor(np.array(data, dtype=float), requires_grad=True, name=name)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.data + b.data, (a, b),
                  lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def neg(a):
    return Tensor(-a.data, (a,), lambda g: (-g,))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.data * b.data, (a, b),
                  lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def matmul(a, b):
    """``np.matmul`` with broadcasting batch dimensions (both operands at least 2-D)."""
    a, b = as_tensor(a), as_tensor(b)
    out = np.matmul(a.data, b.data)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return Tensor(out, (a, b), backward)


def sigmoid(a):
    out = np.empty_like(a.data)
    pos = a.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ez = np.exp(a.data[~pos])
    out[~pos] = ez / (1.0 + ez)
    return Tensor(out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a):
    out = np.tanh(a.data)
    return Tensor(out, (a,), lambda g: (g * (1.0 - out * out),))


def identity(a):
    return a


def prelu(a, alpha):
    """Parametric ReLU with a learnable slope broadcast over the last axis."""
    x = a.data
    pos = x > 0
    out = np.where(pos, x, alpha.data * x)

    def backward(g):
        ga = np.where(pos, g, alpha.data * g)
        galpha = _unbroadcast(np.where(pos, 0.0, g * x), alpha.shape)
        return ga, galpha

    return Tensor(out, (a, alpha), backward)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(out, tuple(tensors), backward)


def take(a, index, axis=0):
    """Gather slices along ``axis`` (repeated indices accumulate in the backward pass)."""
    index = np.asarray(index, dtype=int)
    out = np.take(a.data, index, axis=axis)

    def backward(g):
        ga = np.zeros_like(a.data)
        moved = np.moveaxis(ga, axis, 0)
        np.add.at(moved, index, np.moveaxis(g, axis, 0))
        return (ga,)

    return Tensor(out, (a,), backward)


def segment_sum(a, segments, n_segments, axis=0):
    """Sum slices of ``a`` along ``axis`` into ``n_segments`` buckets."""
    segments = np.asarray(segments, dtype=int)
    moved = np.moveaxis(a.data, axis, 0)
    acc = np.zeros((n_segments,) + moved.shape[1:])
    np.add.at(acc, segments, moved)
    out = np.moveaxis(acc, 0, axis)

    def backward(g):
        return (np.take(g, segments, axis=axis),)

    return Tensor(out, (a,), backward)


def reshape(a, shape):
    return Tensor(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes):
    inverse = np.argsort(axes)
    return Tensor(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),))


def broadcast_to(a, shape):
    return Tensor(np.broadcast_to(a.data, shape).copy(), (a,),
                  lambda g: (_unbroadcast(g, a.shape),))


def index0(a, i):
    """``a[i]`` for an integer index on the leading axis."""
    def backward(g):
        ga = np.zeros_like(a.data)
        ga[i] = g
        return (ga,)

    return Tensor(a.data[i], (a,), backward)


def stack(tensors, axis=0):
    out = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return Tensor(out, tuple(tensors), backward)


def sum_all(a):
    return Tensor(a.data.sum(), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean_all(a):
    n = a.data.size
    return Tensor(a.data.mean(), (a,), lambda g: (np.broadcast_to(g / n, a.shape).copy(),))


def binary_cross_entropy(p, y, pos_weight=1.0):
    """Mean BCE of probabilities ``p`` against 0/1 targets ``y``.

    Probabilities are clamped to ``[1e-12, 1 - 1e-12]`` before the log; the
    clamp passes no gradient outside that range.
    """
    y = np.asarray(y, dtype=float)
    pc = np.clip(p.data, LOG_CLAMP, 1.0 - LOG_CLAMP)
    inside = (p.data > LOG_CLAMP) & (p.data < 1.0 - LOG_CLAMP)
    n = y.size
    value = -np.mean(pos_weight * y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))

    def backward(g):
        d = -(pos_weight * y / pc - (1.0 - y) / (1.0 - pc)) / n
        return (g * d * inside,)

    return Tensor(value, (p,), backward)


ACTIVATIONS = {"sigmoid": sigmoid, "tanh": tanh, "linear": identity}

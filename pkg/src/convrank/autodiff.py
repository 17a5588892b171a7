"""Small reverse-mode differentiation engine over dense numpy arrays.

Every op builds a :class:`Node` holding its value and a closure that pushes
the upstream gradient to its parents. Shapes must match exactly; there is no
broadcasting. Values are float32 unless the inputs are float64, which is how
the gradient checks run a 64-bit shadow of the same graph.
"""

from __future__ import annotations

import numpy as np

DEFAULT_DTYPE = np.float32


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


class Node:
    __slots__ = ("value", "grad", "parents", "backward_fn", "requires_grad", "name")

    def __init__(self, value, parents=(), backward_fn=None, requires_grad=False, name=None):
        self.value = value
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Node{label}(shape={self.value.shape}, dtype={self.value.dtype})"


def _as_array(value, dtype=None):
    arr = np.asarray(value, dtype=dtype)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(DEFAULT_DTYPE)
    return arr


def parameter(value, name=None, dtype=None):
    """A trainable leaf."""
    arr = np.array(value, dtype=dtype or DEFAULT_DTYPE)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"parameter {name!r} has non-finite values")
    return Node(arr, requires_grad=True, name=name)


def constant(value, dtype=None):
    """A leaf that never receives a gradient."""
    arr = _as_array(value, dtype)
    if not np.all(np.isfinite(arr)):
        raise ValueError("constant has non-finite values")
    return Node(arr)


def _result(value, parents, backward_fn):
    needs = any(p.requires_grad for p in parents)
    return Node(value, parents if needs else (), backward_fn if needs else None, needs)


def _check_same(op, a, b):
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")


# -- linear algebra ---------------------------------------------------------

def matmul(a, b):
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")

    def backward(g):
        return g @ b.value.T, a.value.T @ g

    return _result(a.value @ b.value, (a, b), backward)


def transpose(x):
    if x.value.ndim != 2:
        raise DimensionError(f"transpose: expected a matrix, got shape {x.shape}")
    return _result(x.value.T, (x,), lambda g: (g.T,))


def reshape(x, shape):
    shape = tuple(shape)
    if int(np.prod(shape)) != x.value.size:
        raise DimensionError(f"reshape: cannot view {x.shape} as {shape}")
    old = x.shape
    return _result(x.value.reshape(shape), (x,), lambda g: (g.reshape(old),))


def index(x, key):
    """Basic (slice/int) indexing; the gradient scatters back into place."""
    out = x.value[key]
    if out.ndim == 0:
        out = out.reshape(1)

    def backward(g):
        full = np.zeros_like(x.value)
        full[key] += g.reshape(full[key].shape)
        return (full,)

    return _result(np.array(out), (x,), backward)


def concat(nodes, axis=0):
    nodes = list(nodes)
    if not nodes:
        raise DimensionError("concat: no inputs")
    ndim = nodes[0].value.ndim
    for n in nodes:
        rest_n = n.shape[:axis] + n.shape[axis + 1:]
        rest_0 = nodes[0].shape[:axis] + nodes[0].shape[axis + 1:]
        if n.value.ndim != ndim or rest_n != rest_0:
            raise DimensionError(f"concat: shapes {[m.shape for m in nodes]} do not line up on axis {axis}")
    sizes = [n.shape[axis] for n in nodes]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _result(np.concatenate([n.value for n in nodes], axis=axis), tuple(nodes), backward)


# -- elementwise ------------------------------------------------------------

def add(a, b):
    _check_same("add", a, b)
    return _result(a.value + b.value, (a, b), lambda g: (g, g))


def sub(a, b):
    _check_same("sub", a, b)
    return _result(a.value - b.value, (a, b), lambda g: (g, -g))


def mul(a, b):
    _check_same("mul", a, b)
    return _result(a.value * b.value, (a, b), lambda g: (g * b.value, g * a.value))


def scale(x, c):
    c = float(c)
    return _result(x.value * x.value.dtype.type(c), (x,), lambda g: (g * g.dtype.type(c),))


def add_bias(x, b):
    """x[m, n] + b[n] applied to every row; an explicit op, not broadcasting."""
    if x.value.ndim != 2 or b.value.ndim != 1 or x.shape[1] != b.shape[0]:
        raise DimensionError(f"add_bias: cannot add bias {b.shape} to rows of {x.shape}")

    def backward(g):
        return g, g.sum(axis=0, dtype=np.float64).astype(g.dtype)

    return _result(x.value + b.value, (x, b), backward)


def add_n(nodes):
    """Sum of equally shaped nodes, accumulated in float64."""
    nodes = list(nodes)
    for n in nodes[1:]:
        _check_same("add_n", nodes[0], n)
    dtype = nodes[0].value.dtype
    total = np.zeros(nodes[0].shape, dtype=np.float64)
    for n in nodes:
        total += n.value
    return _result(total.astype(dtype), tuple(nodes), lambda g: tuple(g for _ in nodes))


def tanh(x):
    y = np.tanh(x.value)
    return _result(y, (x,), lambda g: (g * (1 - y * y),))


def sigmoid(x):
    v = x.value
    # split by sign so exp never overflows
    e = np.exp(-np.abs(v))
    y = np.where(v >= 0, 1 / (1 + e), e / (1 + e)).astype(v.dtype)
    return _result(y, (x,), lambda g: (g * y * (1 - y),))


# -- probabilistic heads ----------------------------------------------------

def softmax(x):
    """Softmax over the last axis (a vector, or each row of a matrix)."""
    v = x.value
    if v.ndim not in (1, 2) or v.shape[-1] < 1:
        raise DimensionError(f"softmax: unsupported shape {x.shape}")
    shifted = (v - v.max(axis=-1, keepdims=True)).astype(np.float64)
    e = np.exp(shifted)
    y = (e / e.sum(axis=-1, keepdims=True)).astype(v.dtype)

    def backward(g):
        inner = (g * y).sum(axis=-1, keepdims=True, dtype=np.float64).astype(y.dtype)
        return (y * (g - inner),)

    return _result(y, (x,), backward)


LOG_FLOOR = 1e-12


def cross_entropy(p, target):
    """-log p[target] for a probability vector p."""
    if p.value.ndim != 1:
        raise DimensionError(f"cross_entropy: expected a vector, got {p.shape}")
    n = p.shape[0]
    if not isinstance(target, (int, np.integer)) or not 0 <= target < n:
        raise IndexError(f"cross_entropy: target {target!r} outside 0..{n - 1}")
    total = float(np.sum(p.value, dtype=np.float64))
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"cross_entropy: probabilities sum to {total}, not 1")
    pt = float(p.value[target])
    clamped = pt < LOG_FLOOR
    loss = -np.log(max(pt, LOG_FLOOR))

    def backward(g):
        grad = np.zeros_like(p.value)
        if not clamped:
            grad[target] = -g[0] / pt
        return (grad,)

    return _result(np.array([loss], dtype=p.value.dtype), (p,), backward)


def dropout(x, rate, rng, training):
    """Inverted dropout: survivors are scaled by 1/(1-rate) at train time."""
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.value.dtype)
    keep *= x.value.dtype.type(1.0 / (1.0 - rate))
    return _result(x.value * keep, (x,), lambda g: (g * keep,))


# -- reverse pass -----------------------------------------------------------

def _topological_order(root):
    order, seen = [], set()
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
        for parent in node.parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss):
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every trainable leaf."""
    if loss.value.size != 1:
        raise DimensionError(f"backward: loss must be a scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads = {id(loss): np.ones_like(loss.value)}
    for node in reversed(_topological_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.backward_fn is None:
            node.grad = g if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg


def global_norm(gradients):
    return float(np.sqrt(sum(np.sum(np.square(g, dtype=np.float64)) for g in gradients)))


def global_norm_clip(gradients, max_norm=1.0):
    """Scale all gradients by max_norm/N when their joint L2 norm N exceeds max_norm."""
    norm = global_norm(gradients)
    if norm <= max_norm or norm == 0:
        return [g.copy() for g in gradients]
    factor = max_norm / norm
    return [(g * factor).astype(g.dtype) for g in gradients]

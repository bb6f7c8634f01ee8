"""Minimal reverse-mode automatic differentiation over numpy arrays.

A :class:`Tensor` wraps an ``ndarray`` value and remembers how it was produced.
Calling :meth:`Tensor.backward` on a scalar walks the recorded graph in reverse
topological order and accumulates gradients into every leaf that requires them.

Only a closed set of primitives is differentiable: affine maps, matmul,
elementwise add/sub/mul/div, ReLU, square, exp, log, sum/mean, column
concatenation, row slicing and :func:`stop_gradient`.  Feeding a tensor to any
other numpy routine raises :class:`UnsupportedPrimitiveError` immediately, so a
graph can never silently lose its gradient path.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class UnsupportedPrimitiveError(TypeError):
    """Raised when a tensor is passed to an operation outside the supported set."""


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    ndim_extra = grad.ndim - len(shape)
    if ndim_extra > 0:
        grad = grad.sum(axis=tuple(range(ndim_extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A node in the computation graph.

    Leaves created with ``requires_grad=True`` receive gradients in ``.grad``.
    If a leaf is given an explicit ``grad`` buffer, gradients are accumulated
    into it in place, which lets many leaves share one flat gradient vector.
    """

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, value, requires_grad: bool = False, grad: np.ndarray | None = None,
                 _parents: tuple = (), _backward: Callable | None = None, op: str = "leaf"):
        self.value = _as_array(value)
        self.requires_grad = requires_grad
        self.grad = grad
        self._parents = _parents
        self._backward = _backward
        self.op = op

    # numpy interop is deliberately closed: only listed primitives are allowed.
    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        op = _UFUNC_DISPATCH.get(ufunc.__name__)
        if op is not None and method == "__call__" and len(inputs) == 2 and not kwargs:
            return op(*inputs)
        raise UnsupportedPrimitiveError(
            f"numpy ufunc '{ufunc.__name__}' is not a differentiable primitive")

    def __array_function__(self, func, types, args, kwargs):
        raise UnsupportedPrimitiveError(
            f"numpy function '{func.__name__}' is not a differentiable primitive")

    def __array__(self, dtype=None, copy=None):
        raise UnsupportedPrimitiveError(
            "implicit conversion of a Tensor to ndarray would drop its gradient; use .value")

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Tensor(op={self.op!r}, shape={self.value.shape})"

    def item(self) -> float:
        return float(self.value)

    # ---- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return rows(self, index)

    # ---- backward pass --------------------------------------------------
    def backward(self, seed: float | np.ndarray = 1.0) -> None:
        """Accumulate d(self)/d(leaf) into every leaf requiring gradients."""
        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.broadcast_to(_as_array(seed), self.shape).copy()}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    if node.grad is None:
                        node.grad = np.zeros_like(node.value)
                    node.grad += g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not _needs_grad(parent):
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def _needs_grad(t) -> bool:
    return isinstance(t, Tensor) and t.requires_grad


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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
            if isinstance(p, Tensor) and p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    order.reverse()
    return order


def _wrap(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if isinstance(x, (int, float, np.floating, np.integer, np.ndarray)):
        return Tensor(x)
    raise UnsupportedPrimitiveError(f"cannot use {type(x).__name__} in a differentiable graph")


def _node(value, parents: Sequence, backward: Callable, op: str) -> Tensor:
    requires = any(_needs_grad(p) for p in parents)
    return Tensor(value, requires_grad=requires, _parents=tuple(parents) if requires else (),
                  _backward=backward if requires else None, op=op)


# ---- primitives ---------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    return _node(a.value + b.value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    return _node(a.value - b.value, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    return _node(a.value * b.value, (a, b),
                 lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
                 "mul")


def div(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.value / b.value

    def backward(g):
        return (_unbroadcast(g / b.value, a.shape),
                _unbroadcast(-g * out / b.value, b.shape))

    return _node(out, (a, b), backward, "div")


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)

    def backward(g):
        ga = g @ b.value.T if _needs_grad(a) else None
        gb = a.value.T @ g if _needs_grad(b) else None
        return ga, gb

    return _node(a.value @ b.value, (a, b), backward, "matmul")


def affine(x, weight, bias) -> Tensor:
    """``x @ weight + bias`` for a batch ``x`` of shape (n, in)."""
    x, weight, bias = _wrap(x), _wrap(weight), _wrap(bias)

    def backward(g):
        gx = g @ weight.value.T if _needs_grad(x) else None
        gw = x.value.T @ g if _needs_grad(weight) else None
        gb = g.sum(axis=0) if _needs_grad(bias) else None
        return gx, gw, gb

    return _node(x.value @ weight.value + bias.value, (x, weight, bias), backward, "affine")


def relu(x) -> Tensor:
    x = _wrap(x)
    active = x.value > 0.0  # subgradient at 0 is 0
    return _node(np.where(active, x.value, 0.0), (x,), lambda g: (g * active,), "relu")


def square(x) -> Tensor:
    x = _wrap(x)
    return _node(x.value * x.value, (x,), lambda g: (2.0 * g * x.value,), "square")


def exp(x) -> Tensor:
    x = _wrap(x)
    out = np.exp(x.value)
    return _node(out, (x,), lambda g: (g * out,), "exp")


def log(x) -> Tensor:
    x = _wrap(x)
    return _node(np.log(x.value), (x,), lambda g: (g / x.value,), "log")


def sum(x, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy naming
    x = _wrap(x)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return _node(x.value.sum(axis=axis), (x,), backward, "sum")


def mean(x, axis=None) -> Tensor:
    x = _wrap(x)
    n = x.value.size if axis is None else x.value.shape[axis]
    return mul(sum(x, axis=axis), 1.0 / n)


def concat(parts: Iterable, axis: int = 1) -> Tensor:
    parts = [_wrap(p) for p in parts]
    sizes = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward(g):
        return tuple(np.split(g, sizes, axis=axis))

    return _node(np.concatenate([p.value for p in parts], axis=axis), parts, backward, "concat")


def rows(x, index) -> Tensor:
    """Select rows (or any basic index) of ``x``."""
    x = _wrap(x)

    def backward(g):
        full = np.zeros_like(x.value)
        full[index] = g
        return (full,)

    return _node(x.value[index], (x,), backward, "rows")


def stop_gradient(x) -> Tensor:
    """Forward-only copy: the result carries ``x``'s value but no gradient path."""
    x = _wrap(x)
    return Tensor(x.value, op="stop_gradient")


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Tensor) else _as_array(x)


_UFUNC_DISPATCH = {
    "add": add,
    "subtract": sub,
    "multiply": mul,
    "true_divide": div,
    "divide": div,
    "matmul": matmul,
}

"""Reverse-mode automatic differentiation over float64 numpy arrays.

A Tensor records the operation that produced it (a closure per input plus
the parent tensors). backward() walks the recorded graph once, in reverse
topological order, accumulating gradients into .grad buffers. The graph is
define-by-run and single-use: build, differentiate, discard.

Everything is float64. There is no device abstraction and no lazy
evaluation; each op computes eagerly with numpy and stores only what its
backward rule needs.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


class ShapeError(ValueError):
    """Raised when operand shapes cannot combine under the op's rule."""

    def __init__(self, op: str, *shapes: tuple) -> None:
        super().__init__(f"{op}: incompatible shapes {' vs '.join(map(str, shapes))}")


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the context (inference / collection)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _as_array(x) -> Array:
    if isinstance(x, np.ndarray):
        return x.astype(np.float64, copy=False)
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum grad down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fns")

    def __init__(self, data, requires_grad: bool = False) -> None:
        self.data: Array = _as_array(data)
        self.grad: Array | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fns: tuple[Callable[[Array], Array | None], ...] = ()

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> Array:
        return self.data

    def __repr__(self) -> str:
        grad = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{grad})"

    def __len__(self) -> int:
        return self.data.shape[0]

    # -- graph construction ---------------------------------------------------

    @staticmethod
    def _make(
        data: Array,
        parents: Sequence["Tensor"],
        backward_fns: Sequence[Callable[[Array], Array | None]],
    ) -> "Tensor":
        out = Tensor(data)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward_fns = tuple(backward_fns)
        return out

    def detach(self) -> "Tensor":
        """Same values, cut from the graph."""
        return Tensor(self.data)

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into .grad over the recorded graph.

        self must be scalar. Nodes are visited exactly once, in reverse
        topological order of construction.
        """
        if self.data.size != 1:
            raise ShapeError("backward", self.data.shape)
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads: dict[int, Array] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += g
                continue
            for parent, fn in zip(node._parents, node._backward_fns):
                if not parent.requires_grad:
                    continue
                pg = fn(g)
                if pg is None:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        # leaves reached without own entries in topo keep grads via loop above

    # -- elementwise arithmetic -----------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        try:
            data = self.data + other.data
        except ValueError:
            raise ShapeError("add", self.shape, other.shape) from None
        return Tensor._make(
            data,
            (self, other),
            (
                lambda g: _unbroadcast(g, self.data.shape),
                lambda g: _unbroadcast(g, other.data.shape),
            ),
        )

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        return Tensor._make(-self.data, (self,), (lambda g: -g,))

    def __sub__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        try:
            data = self.data - other.data
        except ValueError:
            raise ShapeError("sub", self.shape, other.shape) from None
        return Tensor._make(
            data,
            (self, other),
            (
                lambda g: _unbroadcast(g, self.data.shape),
                lambda g: _unbroadcast(-g, other.data.shape),
            ),
        )

    def __rsub__(self, other) -> "Tensor":
        return Tensor(other) - self

    def __mul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        try:
            data = self.data * other.data
        except ValueError:
            raise ShapeError("mul", self.shape, other.shape) from None
        return Tensor._make(
            data,
            (self, other),
            (
                lambda g: _unbroadcast(g * other.data, self.data.shape),
                lambda g: _unbroadcast(g * self.data, other.data.shape),
            ),
        )

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        try:
            data = self.data / other.data
        except ValueError:
            raise ShapeError("div", self.shape, other.shape) from None
        return Tensor._make(
            data,
            (self, other),
            (
                lambda g: _unbroadcast(g / other.data, self.data.shape),
                lambda g: _unbroadcast(-g * self.data / other.data**2, other.data.shape),
            ),
        )

    def __rtruediv__(self, other) -> "Tensor":
        return Tensor(other) / self

    def __pow__(self, p: float) -> "Tensor":
        if not isinstance(p, (int, float)):
            raise TypeError("exponent must be a python scalar")
        data = self.data**p
        return Tensor._make(
            data, (self,), (lambda g: g * p * self.data ** (p - 1),)
        )

    # -- elementwise functions --------------------------------------------------

    def exp(self) -> "Tensor":
        data = np.exp(self.data)
        return Tensor._make(data, (self,), (lambda g: g * data,))

    def log(self) -> "Tensor":
        return Tensor._make(np.log(self.data), (self,), (lambda g: g / self.data,))

    def sqrt(self) -> "Tensor":
        data = np.sqrt(self.data)
        return Tensor._make(data, (self,), (lambda g: g * 0.5 / data,))

    def tanh(self) -> "Tensor":
        data = np.tanh(self.data)
        return Tensor._make(data, (self,), (lambda g: g * (1.0 - data * data),))

    def relu(self) -> "Tensor":
        mask = self.data > 0
        return Tensor._make(self.data * mask, (self,), (lambda g: g * mask,))

    def abs(self) -> "Tensor":
        sign = np.sign(self.data)
        return Tensor._make(np.abs(self.data), (self,), (lambda g: g * sign,))

    def clip(self, lo: float, hi: float) -> "Tensor":
        """Clamp values; gradient passes only where values stayed in range."""
        mask = (self.data >= lo) & (self.data <= hi)
        return Tensor._make(np.clip(self.data, lo, hi), (self,), (lambda g: g * mask,))

    # -- contractions -------------------------------------------------------------

    def __matmul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        if self.ndim < 2 or other.ndim < 2:
            raise ShapeError("matmul", self.shape, other.shape)
        try:
            data = self.data @ other.data
        except ValueError:
            raise ShapeError("matmul", self.shape, other.shape) from None
        return Tensor._make(
            data,
            (self, other),
            (
                lambda g: _unbroadcast(g @ np.swapaxes(other.data, -1, -2), self.data.shape),
                lambda g: _unbroadcast(np.swapaxes(self.data, -1, -2) @ g, other.data.shape),
            ),
        )

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        data = self.data.sum(axis=axis, keepdims=keepdims)
        shape = self.data.shape

        def bw(g: Array) -> Array:
            if axis is None:
                return np.broadcast_to(g, shape).copy()
            ax = axis if isinstance(axis, tuple) else (axis,)
            if not keepdims:
                g = np.expand_dims(g, ax)
            return np.broadcast_to(g, shape).copy()

        return Tensor._make(data, (self,), (bw,))

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        n = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in (axis if isinstance(axis, tuple) else (axis,))]
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(n))

    # -- movement --------------------------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape
        return Tensor._make(
            self.data.reshape(shape), (self,), (lambda g: g.reshape(old),)
        )

    def transpose(self, *axes) -> "Tensor":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inv = tuple(np.argsort(axes))
        return Tensor._make(
            self.data.transpose(axes), (self,), (lambda g: g.transpose(inv),)
        )

    def swapaxes(self, a: int, b: int) -> "Tensor":
        return Tensor._make(
            np.swapaxes(self.data, a, b), (self,), (lambda g: np.swapaxes(g, a, b),)
        )

    def __getitem__(self, key) -> "Tensor":
        data = self.data[key]
        shape = self.data.shape

        def bw(g: Array) -> Array:
            gx = np.zeros(shape, dtype=np.float64)
            np.add.at(gx, key, g)
            return gx

        return Tensor._make(data, (self,), (bw,))

    def take(self, indices) -> "Tensor":
        """Gather rows along axis 0; backward scatter-adds (repeats allowed)."""
        idx = np.asarray(indices)
        if not np.issubdtype(idx.dtype, np.integer):
            raise TypeError("take expects integer indices")
        data = self.data[idx]
        shape = self.data.shape

        def bw(g: Array) -> Array:
            gx = np.zeros(shape, dtype=np.float64)
            np.add.at(gx, idx, g)
            return gx

        return Tensor._make(data, (self,), (bw,))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def make_bw(i: int):
        lo, hi = offsets[i], offsets[i + 1]

        def bw(g: Array) -> Array:
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            return g[tuple(sl)]

        return bw

    return Tensor._make(data, tensors, tuple(make_bw(i) for i in range(len(tensors))))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)

    def make_bw(i: int):
        def bw(g: Array) -> Array:
            return np.take(g, i, axis=axis)

        return bw

    return Tensor._make(data, tensors, tuple(make_bw(i) for i in range(len(tensors))))


def stop_gradient(x: Tensor) -> Tensor:
    """Identity in the forward pass, zero gradient in the backward pass."""
    return x.detach()


def straight_through(v: Tensor, z: Tensor) -> Tensor:
    """Forward the values of z bitwise while routing the gradient entirely to v."""
    if v.shape != z.shape:
        raise ShapeError("straight_through", v.shape, z.shape)
    return Tensor._make(z.data, (v,), (lambda g: g,))

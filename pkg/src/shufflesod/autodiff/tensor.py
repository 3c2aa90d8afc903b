"""Dense float64 tensor with a dynamically recorded reverse-mode graph."""
from contextlib import contextmanager

import numpy as np

from ..errors import DimensionError

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled():
    return _grad_enabled


class Tensor:
    """A float64 array plus an optional gradient slot.

    Tensors produced by differentiable ops remember their parents and a
    closure mapping the output gradient to one gradient per parent. Leaves
    created with ``requires_grad=True`` accumulate into ``.grad``.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.array(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self.name = name

    @classmethod
    def _from_op(cls, data, parents, backward):
        out = cls.__new__(cls)
        out.data = data if data.dtype == np.float64 else data.astype(np.float64)
        out.grad = None
        out.name = None
        track = _grad_enabled and any(p.requires_grad for p in parents)
        out.requires_grad = track
        out._parents = tuple(parents) if track else ()
        out._backward = backward if track else None
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __len__(self):
        return len(self.data)

    # arithmetic is defined in ops; bound at import time below
    def backward(self, seed=None):
        backward(self, seed)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _topological(root):
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
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _run_backward(out, seed):
    if seed is None:
        seed = np.ones_like(out.data)
    else:
        seed = np.asarray(seed.data if isinstance(seed, Tensor) else seed, dtype=np.float64)
        if seed.shape != out.shape:
            raise DimensionError(f"seed shape {seed.shape} does not match output shape {out.shape}")
    grads = {id(out): seed}
    leaf_grads = {}
    for node in reversed(_topological(out)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            leaf_grads[id(node)] = (node, g)
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    return leaf_grads


def backward(out, seed=None):
    """Accumulate d(out)/d(leaf), contracted with ``seed``, into every reachable leaf's ``.grad``."""
    if not out.requires_grad:
        return
    for node, g in _run_backward(out, seed).values():
        node.grad = g.copy() if node.grad is None else node.grad + g


def grad(out, inputs, seed=None):
    """Return gradients of ``out`` for each tensor in ``inputs``.

    Inputs not connected to ``out`` get an all-zero array. Existing ``.grad``
    buffers are left untouched.
    """
    if not out.requires_grad:
        return [np.zeros_like(t.data) for t in inputs]
    leaf_grads = _run_backward(out, seed)
    result = []
    for t in inputs:
        entry = leaf_grads.get(id(t))
        result.append(np.zeros_like(t.data) if entry is None else np.asarray(entry[1], dtype=np.float64))
    return result

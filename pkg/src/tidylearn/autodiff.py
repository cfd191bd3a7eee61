"""Dense float64 tensors with reverse-mode automatic differentiation.

Small by design: just the primitives the graph-attention VAE and its
training loop need (elementwise arithmetic, matmul, concat, exp/log,
reductions, softmax, LeakyReLU/ELU, slicing, segment ops), plus an SGD
optimiser with classic momentum and a reduce-on-plateau learning-rate
scheduler. Everything is float64 and single-threaded.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


def _as_f64(values) -> Array:
    arr = np.asarray(values, dtype=np.float64)
    return arr


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _index_has_arrays(key) -> bool:
    if isinstance(key, (np.ndarray, list)):
        return True
    if isinstance(key, tuple):
        return any(isinstance(k, (np.ndarray, list)) for k in key)
    return False


class Tensor:
    """A node in a recorded computation graph.

    `data` is a float64 ndarray. Gradients accumulate into `grad` when
    `backward` runs; repeated backward calls without `zero_grad` keep
    accumulating, so optimiser steps must clear them explicitly.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_grad_fn")

    def __init__(self, values, requires_grad: bool = False):
        self.data = _as_f64(values)
        self.requires_grad = bool(requires_grad)
        self.grad: Array | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._grad_fn: Callable[[Array], tuple] | None = None

    # -- construction -------------------------------------------------

    @staticmethod
    def _from_op(data: Array, parents: Sequence["Tensor"],
                 grad_fn: Callable[[Array], tuple]) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._grad_fn = grad_fn
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.item())

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        data = self.data + other.data
        sa, sb = self.shape, other.shape

        def grad_fn(g: Array):
            return _unbroadcast(g, sa), _unbroadcast(g, sb)

        return Tensor._from_op(data, (self, other), grad_fn)

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        return Tensor._from_op(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        data = self.data - other.data
        sa, sb = self.shape, other.shape

        def grad_fn(g: Array):
            return _unbroadcast(g, sa), _unbroadcast(-g, sb)

        return Tensor._from_op(data, (self, other), grad_fn)

    def __rsub__(self, other) -> "Tensor":
        return Tensor(other) - self

    def __mul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        a, b = self.data, other.data
        sa, sb = self.shape, other.shape

        def grad_fn(g: Array):
            return _unbroadcast(g * b, sa), _unbroadcast(g * a, sb)

        return Tensor._from_op(a * b, (self, other), grad_fn)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        a, b = self.data, other.data
        sa, sb = self.shape, other.shape

        def grad_fn(g: Array):
            return _unbroadcast(g / b, sa), _unbroadcast(-g * a / (b * b), sb)

        return Tensor._from_op(a / b, (self, other), grad_fn)

    def __rtruediv__(self, other) -> "Tensor":
        return Tensor(other) / self

    def __pow__(self, exponent: float) -> "Tensor":
        e = float(exponent)
        a = self.data

        def grad_fn(g: Array):
            return (g * e * a ** (e - 1.0),)

        return Tensor._from_op(a ** e, (self,), grad_fn)

    def __matmul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        a, b = self.data, other.data
        if a.ndim != 2 or b.ndim != 2:
            raise ValueError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
        if a.shape[1] != b.shape[0]:
            raise ValueError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")

        def grad_fn(g: Array):
            return g @ b.T, a.T @ g

        return Tensor._from_op(a @ b, (self, other), grad_fn)

    # -- indexing -----------------------------------------------------

    def __getitem__(self, key) -> "Tensor":
        data = self.data[key]
        shape = self.shape
        fancy = _index_has_arrays(key)

        def grad_fn(g: Array):
            buf = np.zeros(shape, dtype=np.float64)
            if fancy:
                np.add.at(buf, key, g)
            else:
                buf[key] += g
            return (buf,)

        return Tensor._from_op(data, (self,), grad_fn)

    def reshape(self, *new_shape) -> "Tensor":
        if len(new_shape) == 1 and isinstance(new_shape[0], (tuple, list)):
            new_shape = tuple(new_shape[0])
        shape = self.shape

        def grad_fn(g: Array):
            return (g.reshape(shape),)

        return Tensor._from_op(self.data.reshape(new_shape), (self,), grad_fn)

    # -- nonlinearities and transcendentals -----------------------------

    def exp(self) -> "Tensor":
        out_data = np.exp(self.data)

        def grad_fn(g: Array):
            return (g * out_data,)

        return Tensor._from_op(out_data, (self,), grad_fn)

    def log(self) -> "Tensor":
        a = self.data

        def grad_fn(g: Array):
            return (g / a,)

        return Tensor._from_op(np.log(a), (self,), grad_fn)

    def leaky_relu(self, negative_slope: float = 0.2) -> "Tensor":
        a = self.data
        slope = float(negative_slope)
        factor = np.where(a > 0, 1.0, slope)

        def grad_fn(g: Array):
            return (g * factor,)

        return Tensor._from_op(np.where(a > 0, a, slope * a), (self,), grad_fn)

    def elu(self, alpha: float = 1.0) -> "Tensor":
        a = self.data
        al = float(alpha)
        out_data = np.where(a > 0, a, al * (np.exp(a) - 1.0))
        # d/dx elu = 1 for x>0 else alpha*e^x = elu(x)+alpha
        factor = np.where(a > 0, 1.0, out_data + al)

        def grad_fn(g: Array):
            return (g * factor,)

        return Tensor._from_op(out_data, (self,), grad_fn)

    def clip_min(self, floor: float) -> "Tensor":
        a = self.data
        keep = a >= floor

        def grad_fn(g: Array):
            return (g * keep,)

        return Tensor._from_op(np.where(keep, a, floor), (self,), grad_fn)

    # -- reductions -----------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        shape = self.shape

        def grad_fn(g: Array):
            if axis is None:
                return (np.broadcast_to(g, shape).copy(),)
            g_exp = g if keepdims else np.expand_dims(g, axis)
            return (np.broadcast_to(g_exp, shape).copy(),)

        return Tensor._from_op(self.data.sum(axis=axis, keepdims=keepdims),
                               (self,), grad_fn)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            count = self.data.size
        else:
            count = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def softmax(self, axis: int = -1) -> "Tensor":
        a = self.data
        shifted = a - a.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        out_data = e / e.sum(axis=axis, keepdims=True)

        def grad_fn(g: Array):
            dot = (g * out_data).sum(axis=axis, keepdims=True)
            return ((g - dot) * out_data,)

        return Tensor._from_op(out_data, (self,), grad_fn)

    # -- backward pass --------------------------------------------------

    def backward(self) -> None:
        """Accumulate d(self)/d(ancestor) into every ancestor's `grad`."""
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar root, got shape {self.shape}")
        if self._grad_fn is None:
            raise ValueError("backward on a detached tensor: no recorded computation")

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))

        grads: dict[int, Array] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._grad_fn is not None:
                parent_grads = node._grad_fn(g)
                for parent, pg in zip(node._parents, parent_grads):
                    if not parent.requires_grad or pg is None:
                        continue
                    acc = grads.get(id(parent))
                    grads[id(parent)] = pg if acc is None else acc + pg
            if node._parents == () or node is self or node.requires_grad:
                if node.grad is None:
                    node.grad = np.array(g, dtype=np.float64, copy=True)
                else:
                    node.grad = node.grad + g

    def zero_grad(self) -> None:
        self.grad = None


# -- free-function aliases over graph-valued inputs ------------------------


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along `axis`; gradient splits back to the operands."""
    tensors = list(tensors)
    if not tensors:
        raise ValueError("concat of an empty sequence")
    datas = [t.data for t in tensors]
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def grad_fn(g: Array):
        pieces = []
        for i in range(len(datas)):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(offsets[i], offsets[i + 1])
            pieces.append(g[tuple(idx)])
        return tuple(pieces)

    return Tensor._from_op(np.concatenate(datas, axis=axis), tensors, grad_fn)


def gather_rows(t: Tensor, index: Array) -> Tensor:
    """Row lookup `t[index]` with scatter-add backward."""
    index = np.asarray(index, dtype=np.int64)
    return t[index]


def segment_sum(t: Tensor, segment_ids: Array, num_segments: int) -> Tensor:
    """Sum rows of `t` into `num_segments` buckets given per-row ids."""
    ids = np.asarray(segment_ids, dtype=np.int64)
    if ids.shape[0] != t.shape[0]:
        raise ValueError("segment_ids length must match leading dimension")
    if ids.size and (ids.min() < 0 or ids.max() >= num_segments):
        raise ValueError("segment id out of range")
    out_shape = (num_segments,) + t.shape[1:]
    data = np.zeros(out_shape, dtype=np.float64)
    np.add.at(data, ids, t.data)

    def grad_fn(g: Array):
        return (g[ids],)

    return Tensor._from_op(data, (t,), grad_fn)


def stack_scalars(tensors: Sequence[Tensor]) -> Tensor:
    """Stack 0-d tensors into a vector (used to average per-user losses)."""
    return concat([t.reshape(1) for t in tensors], axis=0)


# -- optimiser --------------------------------------------------------------


class SgdMomentum:
    """Stochastic gradient descent with classic momentum.

    v <- momentum * v + grad
    p <- p - lr * v
    """

    def __init__(self, params: Sequence[Tensor], lr: float, momentum: float = 0.9):
        self.params = list(params)
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.velocities = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p, v in zip(self.params, self.velocities):
            if p.grad is None:
                continue
            if p.grad.shape != p.data.shape:
                raise ValueError(
                    f"gradient shape {p.grad.shape} does not match parameter {p.data.shape}")
            v *= self.momentum
            v += p.grad
            p.data -= self.lr * v

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


class PlateauScheduler:
    """Halve-style learning-rate reduction when the epoch loss stagnates.

    After `patience` consecutive epochs without improvement the rate is
    multiplied by `factor`, then a cooldown of `cooldown` epochs passes
    before stagnation is counted again.
    """

    def __init__(self, optimizer: SgdMomentum, factor: float = 0.5,
                 patience: int = 100, cooldown: int = 80):
        if not (0.0 < factor < 1.0):
            raise ValueError("factor must lie in (0, 1)")
        if patience < 0 or cooldown < 0:
            raise ValueError("patience and cooldown must be non-negative")
        self.optimizer = optimizer
        self.factor = float(factor)
        self.patience = int(patience)
        self.cooldown = int(cooldown)
        self.best: float | None = None
        self.bad_epochs = 0
        self.cooldown_remaining = 0

    @property
    def lr(self) -> float:
        return self.optimizer.lr

    def step(self, epoch_loss: float) -> float:
        loss = float(epoch_loss)
        if math.isnan(loss):
            raise ValueError("plateau scheduler received a NaN loss")
        if self.best is None or loss < self.best:
            self.best = loss
            self.bad_epochs = 0
        elif self.cooldown_remaining > 0:
            self.cooldown_remaining -= 1
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.optimizer.lr *= self.factor
                self.bad_epochs = 0
                self.cooldown_remaining = self.cooldown
        return self.optimizer.lr

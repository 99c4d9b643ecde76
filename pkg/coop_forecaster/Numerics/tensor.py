"""
Dense float64 tensors with tape-based reverse-mode differentiation.

Operations executed while a Tape is active record one TapeNode per op whose
inputs require gradients. Nodes are appended in execution order, so the tape
is already topologically sorted and backward() is a single reverse sweep.
Outside any tape the same ops run as plain numpy computations.
"""

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from coop_forecaster.Utils.errors import ContractError, EmptyAttentionError, NumericDomainError, ShapeError

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_ACTIVE_TAPES: list['Tape'] = []


class Tensor:
    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None) -> None:
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on a tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> 'Tensor':
        return Tensor(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other) -> 'Tensor':
        return add(self, other)

    def __radd__(self, other) -> 'Tensor':
        return add(other, self)

    def __sub__(self, other) -> 'Tensor':
        return sub(self, other)

    def __rsub__(self, other) -> 'Tensor':
        return sub(other, self)

    def __mul__(self, other) -> 'Tensor':
        return mul(self, other)

    def __rmul__(self, other) -> 'Tensor':
        return mul(other, self)

    def __truediv__(self, other) -> 'Tensor':
        return div(self, other)

    def __neg__(self) -> 'Tensor':
        return neg(self)

    def __matmul__(self, other) -> 'Tensor':
        return matmul(self, other)

    def __getitem__(self, key) -> 'Tensor':
        return slice_(self, key)

    def sum(self, axis=None, keepdims: bool = False) -> 'Tensor':
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> 'Tensor':
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> 'Tensor':
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


@dataclass
class TapeNode:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    def __init__(self) -> None:
        self.nodes: list[TapeNode] = []

    def __enter__(self) -> 'Tape':
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _ACTIVE_TAPES.remove(self)

    def __len__(self) -> int:
        return len(self.nodes)


def active_tape() -> Tape | None:
    return _ACTIVE_TAPES[-1] if _ACTIVE_TAPES else None


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _check_finite(op: str, values: np.ndarray) -> None:
    if not np.isfinite(values).all():
        raise NumericDomainError(f"{op} produced non-finite values")


def _result(op: str, out: np.ndarray, inputs: tuple[Tensor, ...], backward_fn: BackwardFn) -> Tensor:
    _check_finite(op, out)
    result = Tensor.__new__(Tensor)
    result.data = out
    result.name = None
    tape = active_tape()
    result.requires_grad = tape is not None and any(t.requires_grad for t in inputs)
    if result.requires_grad:
        tape.nodes.append(TapeNode(op, inputs, result, backward_fn))
    return result


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def backward(tape: Tape, loss: Tensor, wrt: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    """Reverse sweep from a scalar loss; returns gradients keyed like `wrt`."""
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad or not any(node.output is loss for node in tape.nodes):
        raise ContractError("loss is not recorded on the given tape")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        grad_out = grads.pop(id(node.output), None)
        if grad_out is None:
            continue
        for inp, grad_in in zip(node.inputs, node.backward(grad_out)):
            if grad_in is None or not inp.requires_grad:
                continue
            key = id(inp)
            grads[key] = grads[key] + grad_in if key in grads else grad_in

    return {
        name: grads.get(id(tensor), np.zeros_like(tensor.data))
        for name, tensor in sorted(wrt.items())
    }


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result("add", a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result("sub", a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result("mul", a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if np.any(b.data == 0):
        raise NumericDomainError("division by zero")
    return _result(
        "div", a.data / b.data, (a, b),
        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * a.data / (b.data * b.data), b.shape)),
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _result("neg", -a.data, (a,), lambda g: (-g,))


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    return _result("power", a.data ** exponent, (a,),
                   lambda g: (g * exponent * a.data ** (exponent - 1),))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _result("exp", out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise NumericDomainError("log of a non-positive value")
    return _result("log", np.log(a.data), (a,), lambda g: (g / a.data,))


def abs_(a) -> Tensor:
    a = as_tensor(a)
    return _result("abs", np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    return _result("relu", np.maximum(a.data, 0.0), (a,), lambda g: (g * (a.data > 0),))


def _sigmoid(values: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -values))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return _result("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def softplus(a) -> Tensor:
    a = as_tensor(a)
    return _result("softplus", np.logaddexp(0.0, a.data), (a,), lambda g: (g * _sigmoid(a.data),))


def clamp_min(a, floor: float) -> Tensor:
    a = as_tensor(a)
    return _result("clamp_min", np.maximum(a.data, floor), (a,), lambda g: (g * (a.data > floor),))


# ---------------------------------------------------------------------------
# reductions and linear algebra
# ---------------------------------------------------------------------------

def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = np.asarray(a.data.sum(axis=axis, keepdims=keepdims))

    def _backward(g: np.ndarray):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result("sum", out, (a,), _backward)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    if count == 0:
        raise ShapeError("mean over an empty axis")
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)
    return _result(
        "matmul", out, (a, b),
        lambda g: (
            _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape),
            _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape),
        ),
    )


def softmax(x, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """Max-subtracted softmax; `mask` (broadcastable, True = keep) sends excluded logits to -inf."""
    x = as_tensor(x)
    if not np.isfinite(x.data).all():
        raise NumericDomainError("softmax input is not finite")
    logits = x.data if mask is None else np.where(mask, x.data, -np.inf)
    peak = logits.max(axis=axis, keepdims=True)
    if np.isneginf(peak).any():
        raise EmptyAttentionError("softmax over a fully masked slice")
    weights = np.exp(logits - peak)
    out = weights / weights.sum(axis=axis, keepdims=True)
    return _result("softmax", out, (x,),
                   lambda g: (out * (g - (g * out).sum(axis=axis, keepdims=True)),))


# ---------------------------------------------------------------------------
# shape manipulation and indexing
# ---------------------------------------------------------------------------

def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    return _result("reshape", a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def swapaxes(a, axis1: int, axis2: int) -> Tensor:
    a = as_tensor(a)
    return _result("swapaxes", np.swapaxes(a.data, axis1, axis2), (a,),
                   lambda g: (np.swapaxes(g, axis1, axis2),))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _result("concat", out, tensors, lambda g: tuple(np.split(g, bounds, axis=axis)))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    out = np.stack([t.data for t in tensors], axis=axis)
    return _result("stack", out, tensors,
                   lambda g: tuple(np.take(g, i, axis=axis) for i in range(len(tensors))))


def slice_(a, key) -> Tensor:
    """Basic (view-style) indexing only; use take_rows for integer-array gathers."""
    a = as_tensor(a)

    def _backward(g: np.ndarray):
        full = np.zeros_like(a.data)
        full[key] = g
        return (full,)

    return _result("slice", np.array(a.data[key]), (a,), _backward)


def take_rows(a, indices: np.ndarray) -> Tensor:
    """Gather along axis 0; `indices` may have any shape and repeat rows."""
    a = as_tensor(a)
    indices = np.asarray(indices, dtype=np.int64)

    def _backward(g: np.ndarray):
        full = np.zeros_like(a.data)
        np.add.at(full, indices, g)
        return (full,)

    return _result("take_rows", a.data[indices], (a,), _backward)


def scatter_rows(base, indices: np.ndarray, values) -> Tensor:
    """Copy of `base` with rows `indices` (unique) replaced by `values`."""
    base, values = as_tensor(base), as_tensor(values)
    indices = np.asarray(indices, dtype=np.int64)
    out = base.data.copy()
    out[indices] = values.data

    def _backward(g: np.ndarray):
        grad_base = g.copy()
        grad_base[indices] = 0.0
        return grad_base, g[indices]

    return _result("scatter_rows", out, (base, values), _backward)


def where(condition: np.ndarray, a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    condition = np.asarray(condition, dtype=bool)
    out = np.where(condition, a.data, b.data)
    return _result(
        "where", out, (a, b),
        lambda g: (_unbroadcast(np.where(condition, g, 0.0), a.shape),
                   _unbroadcast(np.where(condition, 0.0, g), b.shape)),
    )

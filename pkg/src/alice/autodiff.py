"""Minimal define-by-run reverse-mode autodiff over float64 numpy arrays.

A :class:`Tape` records every operation whose inputs include a tracked
tensor. Tensors built only from constants record nothing, so the same
forward code doubles as a cheap inference path.

    tape = Tape()
    w = tape.leaf(np.zeros((1, 1)))
    loss = ((x @ w - y) ** 2).mean()
    tape.backward(loss)
    w.grad  # dloss/dw
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

Array = np.ndarray
BackwardFn = Callable[[Array], Sequence["Array | None"]]


class ShapeError(ValueError):
    pass


class Tensor:
    """Dense float64 array plus an optional gradient accumulator."""

    __slots__ = ("data", "grad", "tape", "node_id", "name")
    __array_priority__ = 100.0

    def __init__(self, data, tape: "Tape | None" = None, node_id: int | None = None, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.tape = tape
        self.node_id = node_id
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def tracked(self) -> bool:
        return self.tape is not None

    def numpy(self) -> Array:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"expected a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        tag = f", node={self.node_id}" if self.tracked else ""
        return f"Tensor(shape={self.shape}{tag})"

    # arithmetic sugar
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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __pow__(self, p):
        if p != 2:
            raise NotImplementedError("only square is supported")
        return square(self)

    def tanh(self):
        return tanh(self)

    def relu(self):
        return relu(self)

    def sigmoid(self):
        return sigmoid(self)

    def log(self):
        return log(self)

    def exp(self):
        return exp(self)

    def square(self):
        return square(self)

    def abs(self):
        return absolute(self)

    def mean(self, axis=None):
        return mean(self, axis)

    def sum(self, axis=None):
        return total(self, axis)


class Tape:
    """Ordered record of operations; replayed backwards by :meth:`backward`."""

    def __init__(self):
        self.ops: list[tuple[int, tuple[Tensor, ...], BackwardFn, str]] = []
        self.leaves: list[Tensor] = []
        self._next_id = 0
        self._bound: dict[int, dict[str, Tensor]] = {}

    def _new_id(self) -> int:
        nid = self._next_id
        self._next_id += 1
        return nid

    def leaf(self, data, name: str | None = None) -> Tensor:
        t = Tensor(data, tape=self, node_id=self._new_id(), name=name)
        self.leaves.append(t)
        return t

    def watch(self, model) -> dict[str, Tensor]:
        """Register every array in ``model.params`` as a leaf on this tape."""
        key = id(model)
        if key not in self._bound:
            prefix = getattr(model, "name", type(model).__name__)
            self._bound[key] = {k: self.leaf(v, name=f"{prefix}.{k}") for k, v in model.params.items()}
        return self._bound[key]

    def bound(self, model) -> dict[str, Tensor] | None:
        return self._bound.get(id(model))

    def grads(self, model) -> dict[str, Array]:
        bound = self._bound[id(model)]
        return {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in bound.items()}

    def record(self, kind: str, data: Array, inputs: tuple[Tensor, ...], backward: BackwardFn) -> Tensor:
        out = Tensor(data, tape=self, node_id=self._new_id())
        self.ops.append((out.node_id, inputs, backward, kind))
        return out

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss.tape is not self:
            raise ValueError("loss was not produced on this tape")
        grads: dict[int, Array] = {loss.node_id: np.ones_like(loss.data)}
        for node_id, inputs, fn, _ in reversed(self.ops):
            g = grads.pop(node_id, None)
            if g is None:
                continue
            for inp, gi in zip(inputs, fn(g)):
                if gi is None or inp.tape is not self:
                    continue
                prev = grads.get(inp.node_id)
                grads[inp.node_id] = gi if prev is None else prev + gi
        for leaf in self.leaves:
            g = grads.get(leaf.node_id)
            if g is not None:
                leaf.grad = g if leaf.grad is None else leaf.grad + g


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _tape_of(*ts: Tensor) -> Tape | None:
    tape = None
    for t in ts:
        if t.tape is not None:
            if tape is not None and t.tape is not tape:
                raise ValueError("inputs live on different tapes")
            tape = t.tape
    return tape


def _emit(kind: str, data: Array, inputs: tuple[Tensor, ...], backward: BackwardFn) -> Tensor:
    tape = _tape_of(*inputs)
    if tape is None:
        return Tensor(data)
    return tape.record(kind, data, inputs, backward)


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _check_broadcast(kind: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{kind}: cannot broadcast shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# binary ops


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("add", a, b)
    sa, sb = a.shape, b.shape
    return _emit("add", a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("sub", a, b)
    sa, sb = a.shape, b.shape
    return _emit("sub", a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("mul", a, b)
    ad, bd = a.data, b.data
    return _emit(
        "mul", ad * bd, (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
    )


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def back(g):
        ga = g @ bd.T if a.tracked else None
        gb = ad.T @ g if b.tracked else None
        return ga, gb

    return _emit("matmul", ad @ bd, (a, b), back)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    """Concatenate along the feature axis, e.g. ``[z eps]`` generator inputs."""
    ts = tuple(_wrap(t) for t in tensors)
    if len(ts) == 1:
        return ts[0]
    lead = ts[0].shape[:-1]
    for t in ts:
        if t.data.ndim != ts[0].data.ndim or t.shape[:-1] != lead:
            raise ShapeError("concat: mismatched shapes " + ", ".join(str(t.shape) for t in ts))
    splits = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return _emit(
        "concat", np.concatenate([t.data for t in ts], axis=axis), ts,
        lambda g: np.split(g, splits, axis=axis),
    )


# ---------------------------------------------------------------------------
# elementwise


def tanh(a) -> Tensor:
    a = _wrap(a)
    y = np.tanh(a.data)
    return _emit("tanh", y, (a,), lambda g: (g * (1.0 - y * y),))


def relu(a) -> Tensor:
    a = _wrap(a)
    mask = a.data > 0
    return _emit("relu", a.data * mask, (a,), lambda g: (g * mask,))


def _stable_sigmoid(x: Array) -> Array:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    y = _stable_sigmoid(a.data)
    return _emit("sigmoid", y, (a,), lambda g: (g * y * (1.0 - y),))


def softplus(a) -> Tensor:
    a = _wrap(a)
    x = a.data
    y = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return _emit("softplus", y, (a,), lambda g: (g * _stable_sigmoid(x),))


def log_sigmoid(a) -> Tensor:
    """log(sigmoid(t)) = -softplus(-t); finite for any finite logit."""
    a = _wrap(a)
    x = a.data
    y = np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))
    return _emit("log_sigmoid", y, (a,), lambda g: (g * _stable_sigmoid(-x),))


def log(a) -> Tensor:
    a = _wrap(a)
    x = a.data
    return _emit("log", np.log(x), (a,), lambda g: (g / x,))


def exp(a) -> Tensor:
    a = _wrap(a)
    y = np.exp(a.data)
    return _emit("exp", y, (a,), lambda g: (g * y,))


def square(a) -> Tensor:
    a = _wrap(a)
    x = a.data
    return _emit("square", x * x, (a,), lambda g: (2.0 * g * x,))


def absolute(a) -> Tensor:
    a = _wrap(a)
    x = a.data
    return _emit("abs", np.abs(x), (a,), lambda g: (g * np.sign(x),))


# ---------------------------------------------------------------------------
# reductions


def mean(a, axis: int | None = None) -> Tensor:
    a = _wrap(a)
    shape = a.shape
    if axis is None:
        n = a.data.size
        return _emit("mean", np.asarray(a.data.mean()), (a,), lambda g: (np.full(shape, g / n),))
    n = shape[axis]
    return _emit(
        "mean", a.data.mean(axis=axis, keepdims=True), (a,),
        lambda g: (np.broadcast_to(g / n, shape).copy(),),
    )


def total(a, axis: int | None = None) -> Tensor:
    a = _wrap(a)
    shape = a.shape
    if axis is None:
        return _emit("sum", np.asarray(a.data.sum()), (a,), lambda g: (np.full(shape, g),))
    return _emit(
        "sum", a.data.sum(axis=axis, keepdims=True), (a,),
        lambda g: (np.broadcast_to(g, shape).copy(),),
    )


def log_softmax(a) -> Tensor:
    """Row-wise log-softmax over the last axis."""
    a = _wrap(a)
    x = a.data
    shifted = x - x.max(axis=-1, keepdims=True)
    y = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    p = np.exp(y)
    return _emit("log_softmax", y, (a,), lambda g: (g - p * g.sum(axis=-1, keepdims=True),))


def pick(a, index: Array) -> Tensor:
    """Select ``a[i, index[i]]`` per row; shape (B, 1)."""
    a = _wrap(a)
    index = np.asarray(index, dtype=int)
    if a.data.ndim != 2 or index.shape != (a.shape[0],):
        raise ShapeError(f"pick: rows {a.shape} vs index {index.shape}")
    rows = np.arange(a.shape[0])
    shape = a.shape

    def back(g):
        out = np.zeros(shape)
        out[rows, index] = g[:, 0]
        return (out,)

    return _emit("pick", a.data[rows, index][:, None], (a,), back)


def detach(a) -> Tensor:
    return Tensor(_wrap(a).data)


_UNARY = {
    "tanh": tanh, "relu": relu, "sigmoid": sigmoid, "log": log, "exp": exp,
    "square": square, "abs": absolute, "softplus": softplus, "log_sigmoid": log_sigmoid,
    "mean": mean, "sum": total, "log_softmax": log_softmax,
}
_BINARY = {"matmul": matmul, "add": add, "sub": sub, "mul": mul}


def forward_op(kind: str, *inputs) -> Tensor:
    """Dispatch an op by name; ``concat`` takes any number of inputs."""
    if kind == "concat":
        return concat(inputs)
    if kind in _BINARY:
        if len(inputs) != 2:
            raise TypeError(f"{kind} takes two inputs")
        return _BINARY[kind](*inputs)
    if kind in _UNARY:
        if len(inputs) != 1:
            raise TypeError(f"{kind} takes one input")
        return _UNARY[kind](inputs[0])
    raise KeyError(f"unknown op kind {kind!r}")


def backward(tape: Tape, loss: Tensor) -> None:
    tape.backward(loss)


# ---------------------------------------------------------------------------
# optimizer


class AdamState:
    def __init__(self):
        self.m: dict[str, Array] = {}
        self.v: dict[str, Array] = {}
        self.t = 0


def adam_step(params: dict[str, Array], grads: dict[str, Array], state: AdamState,
              lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """In-place bias-corrected Adam update (descent on ``grads``)."""
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ShapeError(f"adam: grad {k} has shape {g.shape}, param has {p.shape}")
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        m, v = state.m[k], state.v[k]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= (lr / bc1) * m / (np.sqrt(v / bc2) + eps)


class Adam:
    def __init__(self, params: dict[str, Array], lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state = AdamState()

    def step(self, grads: dict[str, Array]) -> None:
        adam_step(self.params, grads, self.state, self.lr, self.betas[0], self.betas[1], self.eps)

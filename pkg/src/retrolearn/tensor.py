"""Reverse-mode automatic differentiation over dense float64 arrays.

The engine is deliberately small: a ``Tape`` records every differentiable
operation in execution order, and ``Tape.backward`` replays the records in
exact reverse order, accumulating gradients into the participating tensors.
Only the operations an MLP classifier and its losses need are provided.

Ops record themselves only while a tape is active (``with Tape():``), so
evaluation code simply runs outside any tape and pays no bookkeeping cost.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ShapeError",
    "GraphError",
    "Tensor",
    "Tape",
    "record_op",
    "linear",
    "relu",
    "log_softmax",
    "exp",
    "mul",
    "add",
    "scale",
    "shift",
    "rowsum",
    "gather_rows",
    "total",
    "mean",
]


class ShapeError(ValueError):
    """Operand shapes do not match what an operation requires."""


class GraphError(RuntimeError):
    """Backward was requested through a tensor the tape never produced."""


class Tensor:
    """A dense float64 array plus an optional gradient slot.

    ``grad`` is ``None`` until a backward pass touches the tensor; backward
    zeroes the slots of every tensor on the tape before accumulating, so a
    second backward over the same tape reproduces the same gradients.
    """

    __slots__ = ("values", "requires_grad", "grad", "name")

    def __init__(self, values, requires_grad: bool = False, name: str = ""):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.values)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"


class _Record:
    __slots__ = ("output", "inputs", "backward_fn")

    def __init__(self, output: Tensor, inputs: tuple[Tensor, ...], backward_fn: Callable):
        self.output = output
        self.inputs = inputs
        self.backward_fn = backward_fn


_ACTIVE_TAPES: list["Tape"] = []


class Tape:
    """Ordered record of executed differentiable operations.

    Use as a context manager around the forward pass, then call
    ``backward`` on the scalar produced inside it.
    """

    def __init__(self):
        self._records: list[_Record] = []
        self._output_ids: set[int] = set()

    def __enter__(self) -> "Tape":
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _ACTIVE_TAPES.pop()
        if popped is not self:  # pragma: no cover - misuse guard
            raise GraphError("tape context exited out of order")

    def __len__(self) -> int:
        return len(self._records)

    def _add(self, record: _Record) -> None:
        self._records.append(record)
        self._output_ids.add(id(record.output))

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(tensor) into every recorded tensor's grad.

        Gradient slots of all tensors on the tape are zeroed first, so the
        call is idempotent. Raises ``GraphError`` if ``loss`` was not
        produced by an operation recorded on this tape, and ``ShapeError``
        if it is not a scalar.
        """
        if loss.shape != ():
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        if id(loss) not in self._output_ids:
            raise GraphError("loss tensor is not connected to this tape")
        for record in self._records:
            for t in (*record.inputs, record.output):
                if t.requires_grad:
                    t.grad = np.zeros_like(t.values)
        loss.grad = np.ones(())
        for record in reversed(self._records):
            if record.output.grad is not None:
                record.backward_fn(record.output.grad)


def record_op(out_values: np.ndarray, inputs: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    """Wrap an op result, registering it on the active tape when one exists.

    ``backward_fn`` receives the output gradient and must accumulate (+=)
    into ``inp.grad`` for each input that requires a gradient. This is the
    single extension point every built-in op goes through; fused custom ops
    (e.g. composite losses) can use it directly.
    """
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(out_values, requires_grad=needs and bool(_ACTIVE_TAPES))
    if out.requires_grad:
        _ACTIVE_TAPES[-1]._add(_Record(out, tuple(inputs), backward_fn))
    return out


def _require_2d(t: Tensor, op: str) -> None:
    if t.values.ndim != 2:
        raise ShapeError(f"{op} expects a 2-d input, got shape {t.shape}")


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map ``x @ w + b`` for a batch of row vectors."""
    _require_2d(x, "linear")
    if w.values.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"linear: x {x.shape} does not match w {w.shape}")
    if b.shape != (w.shape[1],):
        raise ShapeError(f"linear: b {b.shape} does not match w {w.shape}")
    out_values = x.values @ w.values + b.values

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.grad += g @ w.values.T
        if w.requires_grad:
            w.grad += x.values.T @ g
        if b.requires_grad:
            b.grad += g.sum(axis=0)

    return record_op(out_values, (x, w, b), backward)


def relu(x: Tensor) -> Tensor:
    """Elementwise max(x, 0). The derivative at exactly 0 is taken as 0."""
    mask = x.values > 0.0
    out_values = np.where(mask, x.values, 0.0)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.grad += g * mask

    return record_op(out_values, (x,), backward)


def log_softmax(x: Tensor, tau: float = 1.0) -> Tensor:
    """Row-wise log of the temperature-softened softmax of ``x``.

    Computed as ``z - logsumexp(z)`` with ``z = x / tau`` after max
    subtraction, which keeps every entry finite for finite inputs.
    """
    if tau <= 0.0:
        raise ValueError(f"temperature must be positive, got {tau}")
    _require_2d(x, "log_softmax")
    z = x.values / tau
    m = z.max(axis=1, keepdims=True)
    shifted = z - m
    lse = m + np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out_values = z - lse
    soft = np.exp(out_values)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.grad += (g - soft * g.sum(axis=1, keepdims=True)) / tau

    return record_op(out_values, (x,), backward)


def exp(x: Tensor) -> Tensor:
    out_values = np.exp(x.values)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.grad += g * out_values

    return record_op(out_values, (x,), backward)


def mul(a: Tensor, b) -> Tensor:
    """Elementwise product; ``b`` may be a plain array, kept out of the graph."""
    b_values = b.values if isinstance(b, Tensor) else np.asarray(b, dtype=np.float64)
    if a.shape != b_values.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b_values.shape} differ")
    out_values = a.values * b_values
    inputs = (a, b) if isinstance(b, Tensor) else (a,)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.grad += g * b_values
        if isinstance(b, Tensor) and b.requires_grad:
            b.grad += g * a.values

    return record_op(out_values, inputs, backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} differ")
    out_values = a.values + b.values

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.grad += g
        if b.requires_grad:
            b.grad += g

    return record_op(out_values, (a, b), backward)


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    out_values = x.values * c

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.grad += g * c

    return record_op(out_values, (x,), backward)


def shift(x: Tensor, c: float) -> Tensor:
    """Add a constant; gradient passes through unchanged."""
    out_values = x.values + float(c)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.grad += g

    return record_op(out_values, (x,), backward)


def rowsum(x: Tensor) -> Tensor:
    """Sum each row of a 2-d tensor, returning a vector."""
    _require_2d(x, "rowsum")
    out_values = x.values.sum(axis=1)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.grad += g[:, None]

    return record_op(out_values, (x,), backward)


def gather_rows(x: Tensor, index) -> Tensor:
    """Pick ``x[i, index[i]]`` for each row, returning a vector."""
    _require_2d(x, "gather_rows")
    idx = np.asarray(index)
    if idx.ndim != 1 or idx.shape[0] != x.shape[0]:
        raise ShapeError(f"gather_rows: index {idx.shape} does not match rows of {x.shape}")
    if not np.issubdtype(idx.dtype, np.integer):
        raise ShapeError("gather_rows: index must be integer")
    if idx.min(initial=0) < 0 or idx.max(initial=0) >= x.shape[1]:
        raise ShapeError(f"gather_rows: index out of range for {x.shape[1]} columns")
    rows = np.arange(x.shape[0])
    out_values = x.values[rows, idx]

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            np.add.at(x.grad, (rows, idx), g)

    return record_op(out_values, (x,), backward)


def total(x: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    out_values = np.asarray(x.values.sum())

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.grad += g * np.ones_like(x.values)

    return record_op(out_values, (x,), backward)


def mean(x: Tensor) -> Tensor:
    """Mean of all elements, as a scalar tensor."""
    out_values = np.asarray(x.values.mean())
    n = x.size

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.grad += g * np.full_like(x.values, 1.0 / n)

    return record_op(out_values, (x,), backward)

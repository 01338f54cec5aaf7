"""Dense 2-D tensors and the gradient tape that records operations on them.

Every op in :mod:`fdgatii.tensor_engine.ops` computes its forward result
eagerly with numpy.  When a :class:`GradTape` is active and at least one input
requires a gradient, the op appends a record ``(output, inputs, backward_fn)``
to the tape.  ``tape.backward(loss)`` then walks the records in exact reverse
order and accumulates gradients into ``Tensor.grad``.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import ShapeError

_TAPE_STACK: list["GradTape"] = []


class Tensor:
    """A rank-2 float64 array that can take part in reverse-mode differentiation."""

    __slots__ = ("values", "requires_grad", "grad", "name")

    def __init__(self, values, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.array(values, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        if arr.ndim != 2:
            raise ShapeError(f"Tensor must be rank 2, got shape {arr.shape}")
        self.values = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @classmethod
    def _wrap(cls, arr: np.ndarray, requires_grad: bool) -> "Tensor":
        # internal constructor; skips the copy done by __init__
        t = cls.__new__(cls)
        t.values = arr
        t.requires_grad = requires_grad
        t.grad = None
        t.name = None
        return t

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def numpy(self) -> np.ndarray:
        return self.values

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.values[0, 0])

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.values, False)

    def _accumulate(self, g: np.ndarray) -> None:
        if g.shape != self.values.shape:
            raise ShapeError(f"gradient shape {g.shape} != tensor shape {self.shape}")
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad = self.grad + g

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # operator sugar, all routed through ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __mul__(self, other):
        from . import ops
        if isinstance(other, Tensor):
            return ops.mul(self, other)
        return ops.scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)


class _Record:
    __slots__ = ("output", "inputs", "backward_fn", "op")

    def __init__(self, output, inputs, backward_fn, op):
        self.output = output
        self.inputs = inputs
        self.backward_fn = backward_fn
        self.op = op


class GradTape:
    """Ordered record of executed differentiable operations.

    Use as a context manager; ops executed inside the ``with`` block are
    recorded.  A tape can be replayed backwards exactly once.
    """

    def __init__(self):
        self._records: list[_Record] = []
        self._consumed = False

    def __enter__(self) -> "GradTape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPE_STACK.remove(self)

    def __len__(self) -> int:
        return len(self._records)

    @property
    def ops(self) -> list[str]:
        return [r.op for r in self._records]

    def record(self, output: Tensor, inputs: Sequence[Tensor],
               backward_fn: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]], op: str) -> None:
        if self._consumed:
            raise RuntimeError("cannot record onto a tape that has already been replayed")
        self._records.append(_Record(output, tuple(inputs), backward_fn, op))

    def backward(self, loss: Tensor, visit: Optional[Callable[[str], None]] = None) -> None:
        """Accumulate d(loss)/d(input) into ``.grad`` of every tensor requiring grad.

        ``visit`` is called with each op name in the order processed; handy for
        checking the replay order.
        """
        if self._consumed:
            raise RuntimeError("backward() called twice on the same tape; run a new forward pass")
        if loss.values.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not loss.requires_grad:
            raise RuntimeError("loss does not depend on any tensor requiring grad")
        if not any(r.output is loss for r in self._records):
            raise RuntimeError("loss was not produced on this tape")
        self._consumed = True
        # intermediates start clean so repeated forward passes do not mix
        for r in self._records:
            r.output.grad = None
        loss.grad = np.ones_like(loss.values)
        for r in reversed(self._records):
            if visit is not None:
                visit(r.op)
            g = r.output.grad
            if g is None:
                continue
            in_grads = r.backward_fn(g)
            for t, gi in zip(r.inputs, in_grads):
                if gi is not None and t.requires_grad:
                    t._accumulate(gi)


def active_tape() -> Optional[GradTape]:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def no_tape():
    """Context manager that suspends recording (e.g. for evaluation)."""
    return _NoTape()


class _NoTape:
    def __enter__(self):
        self._saved = list(_TAPE_STACK)
        _TAPE_STACK.clear()

    def __exit__(self, *exc):
        _TAPE_STACK[:] = self._saved

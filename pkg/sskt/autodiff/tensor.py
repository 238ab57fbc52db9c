# Copyright 2025 The SSKT Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Dense tensors and the tape that records them for reverse-mode differentiation.

A `Tensor` wraps a read-only float64 array. Operations are `Function`
subclasses; when a `Tape` is active on the current thread and any input
requires grad, `Function.apply` records the call so `backward` can replay it
in reverse.
"""

import contextlib
import dataclasses
import logging
import threading
from typing import Any, Iterator, Sequence

import numpy as np

from sskt.errors import GraphError, NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

_local = threading.local()


class Tensor:
    """An immutable n-dimensional float64 value.

    Attributes:
        data: The row-major values, read-only.
        requires_grad: Whether gradients are tracked for this tensor.
        name: Optional label used in error messages and checkpoints.
    """

    __slots__ = ("data", "requires_grad", "name")

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        name: str | None = None,
    ) -> None:
        array = np.array(data, dtype=np.float64)
        _check_finite(array, name or "tensor")
        array.setflags(write=False)
        self.data = array
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def _wrap(cls, array: np.ndarray, origin: str) -> "Tensor":
        """Adopts a freshly computed array without copying it."""
        array = np.asarray(array, dtype=np.float64)
        _check_finite(array, origin)
        array.setflags(write=False)
        out = cls.__new__(cls)
        out.data = array
        out.requires_grad = False
        out.name = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        """Returns a writable copy of the values."""
        return self.data.copy()

    def detach(self) -> "Tensor":
        """Returns a tensor sharing the values but outside any graph."""
        return Tensor._wrap(self.data, self.name or "detach")

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return (
            f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}"
            f"{label})"
        )


def _check_finite(array: np.ndarray, origin: str) -> None:
    if not np.isfinite(array).all():
        raise NonFiniteError(f"{origin} produced non-finite values")


def as_array(value: "Tensor | np.ndarray | Sequence[Any]") -> np.ndarray:
    """Returns the float64 values of a tensor or array-like, never tracked."""
    if isinstance(value, Tensor):
        return value.data
    return np.asarray(value, dtype=np.float64)


class Function:
    """A differentiable primitive.

    Subclasses implement `forward` on raw arrays (non-tensor constants arrive
    as keyword arguments) and `backward`, which maps the gradient of the
    output to one gradient per tensor input, or None for inputs that need
    none. Anything the backward pass needs is stored on `self`.
    """

    def forward(self, *arrays: np.ndarray, **constants: Any) -> np.ndarray:
        raise NotImplementedError("Forward pass not implemented for this function")

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        raise NotImplementedError("Backward pass not implemented for this function")

    @classmethod
    def apply(cls, *inputs: Tensor, **constants: Any) -> Tensor:
        fn = cls()
        out = Tensor._wrap(
            fn.forward(*(t.data for t in inputs), **constants), cls.__name__
        )
        tape = current_tape()
        if tape is not None and any(t.requires_grad for t in inputs):
            out.requires_grad = True
            tape.record(out, inputs, fn)
        return out


@dataclasses.dataclass(frozen=True)
class Node:
    """One recorded call: the output, its inputs, and the function used."""

    output: Tensor
    inputs: tuple[Tensor, ...]
    fn: Function


class Tape:
    """Records operations in execution order, so parents precede children.

    A tape belongs to one thread and one training step. Use it as a context
    manager; operations executed inside the block are recorded.
    """

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self._positions: dict[int, int] = {}

    def record(self, output: Tensor, inputs: Sequence[Tensor], fn: Function) -> None:
        self._positions[id(output)] = len(self.nodes)
        self.nodes.append(Node(output, tuple(inputs), fn))

    def position(self, tensor: Tensor) -> int | None:
        pos = self._positions.get(id(tensor))
        if pos is not None and self.nodes[pos].output is tensor:
            return pos
        return None

    def __len__(self) -> int:
        return len(self.nodes)

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc_info: object) -> None:
        stack = _stack()
        if stack and stack[-1] is self:
            stack.pop()

    def backward(self, loss: Tensor) -> "Gradients":
        return backward(loss, self)


def _stack() -> list[Tape]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def current_tape() -> Tape | None:
    """Returns the innermost active tape of this thread, if recording."""
    if getattr(_local, "paused", 0):
        return None
    stack = _stack()
    return stack[-1] if stack else None


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Suspends recording on this thread for the duration of the block."""
    _local.paused = getattr(_local, "paused", 0) + 1
    try:
        yield
    finally:
        _local.paused -= 1


class Gradients:
    """Gradient map returned by `backward`, keyed by tensor identity."""

    def __init__(self, values: dict[int, np.ndarray], tensors: dict[int, Tensor]):
        self._values = values
        self._tensors = tensors

    def __getitem__(self, tensor: Tensor) -> np.ndarray:
        grad = self._values.get(id(tensor))
        if grad is not None and self._tensors.get(id(tensor)) is tensor:
            return grad
        if tensor.requires_grad:
            return np.zeros(tensor.shape)
        raise KeyError(f"{tensor!r} does not require grad")

    def __contains__(self, tensor: object) -> bool:
        return self._tensors.get(id(tensor)) is tensor

    def __len__(self) -> int:
        return len(self._tensors)


def backward(loss: Tensor, tape: Tape) -> Gradients:
    """Differentiates a scalar loss through the operations recorded on `tape`.

    Args:
        loss: A scalar tensor produced while `tape` was recording.
        tape: The tape that recorded the forward pass.

    Returns:
        Gradients for every tensor that requires grad and lies on a path to
        the loss. Replay order is fixed by the tape, so results are bitwise
        reproducible for identical forward passes.

    Raises:
        GraphError: If the loss is not a scalar or was not recorded on `tape`.
    """
    if loss.ndim != 0:
        raise GraphError(f"loss must be a scalar, got shape {loss.shape}")
    end = tape.position(loss)
    if end is None:
        raise GraphError("loss is detached: it was not recorded on this tape")

    values: dict[int, np.ndarray] = {id(loss): np.ones(())}
    tensors: dict[int, Tensor] = {id(loss): loss}
    for node in reversed(tape.nodes[: end + 1]):
        grad = values.get(id(node.output))
        if grad is None:
            continue
        input_grads = node.fn.backward(grad)
        for tensor, input_grad in zip(node.inputs, input_grads):
            if input_grad is None or not tensor.requires_grad:
                continue
            if input_grad.shape != tensor.shape:
                raise ShapeError(
                    f"{type(node.fn).__name__} returned gradient of shape "
                    f"{input_grad.shape} for input of shape {tensor.shape}"
                )
            key = id(tensor)
            if key in values:
                values[key] = values[key] + input_grad
            else:
                values[key] = input_grad
                tensors[key] = tensor
    logger.debug("backward replayed %d of %d nodes", end + 1, len(tape))
    return Gradients(values, tensors)

"""
Reverse-mode automatic differentiation over dense float64 tensors

Primitives record a vector-Jacobian closure on the innermost active
``Tape``. Tensors created while no tape is active carry no history, which
is how frozen models are evaluated and flows are inverted.
"""

import itertools
import logging
import threading
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..utils.errors import NumericalError, ShapeError, TapeError

logger = logging.getLogger(__name__)

ArrayLike = Union['Tensor', np.ndarray, float, int, Sequence]

_tape_ids = itertools.count(1)
_local = threading.local()


def _tape_stack() -> List['Tape']:
    stack = getattr(_local, 'stack', None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape() -> Optional['Tape']:
    """Return the innermost tape of the calling thread, if any."""
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """Dense real-valued array that can participate in a differentiation tape."""

    # Make numpy defer to Tensor's reflected operators
    __array_ufunc__ = None

    def __init__(self, values: ArrayLike, requires_grad: bool = False, name: Optional[str] = None):
        if isinstance(values, Tensor):
            values = values.values
        self.values = np.array(values, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.tape_id: Optional[int] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def is_leaf(self) -> bool:
        return self.tape_id is None

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError('item', self.shape, detail='tensor is not scalar')
        return float(self.values.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.values.copy()

    def __len__(self) -> int:
        return self.values.shape[0]

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ''
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # Operators
    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return subtract(self, other)
    def __rsub__(self, other): return subtract(other, self)
    def __mul__(self, other): return multiply(self, other)
    def __rmul__(self, other): return multiply(other, self)
    def __neg__(self): return negate(self)
    def __matmul__(self, other): return matmul(self, other)
    def __rmatmul__(self, other): return matmul(other, self)
    def __getitem__(self, index): return slice_(self, index)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("Tensor division is only defined for constant divisors")
        return multiply(self, 1.0 / np.asarray(other, dtype=np.float64))

    def exp(self): return exp(self)
    def log(self): return log(self)
    def tanh(self): return tanh(self)
    def arctan(self): return arctan(self)
    def relu(self): return relu(self)
    def sum(self, axis=None, keepdims=False): return sum_(self, axis=axis, keepdims=keepdims)
    def mean(self, axis=None, keepdims=False): return mean(self, axis=axis, keepdims=keepdims)
    def reshape(self, *shape): return reshape(self, shape[0] if len(shape) == 1 else shape)


def as_tensor(value: ArrayLike) -> Tensor:
    """Wrap constants; tensors pass through unchanged."""
    return value if isinstance(value, Tensor) else Tensor(value)


class _Node:
    __slots__ = ('primitive', 'output', 'inputs', 'vjp')

    def __init__(self, primitive: str, output: Tensor, inputs: Tuple[Tensor, ...],
                 vjp: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]):
        self.primitive = primitive
        self.output = output
        self.inputs = inputs
        self.vjp = vjp


class Tape:
    """
    Records primitives for a single reverse pass.

    A tape may be consumed once; calling ``backward`` again raises
    ``TapeError`` instead of accumulating.
    """

    def __init__(self):
        self.tape_id = next(_tape_ids)
        self._nodes: List[_Node] = []
        self._consumed = False

    def __enter__(self) -> 'Tape':
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def consumed(self) -> bool:
        return self._consumed

    def record(self, primitive: str, output: Tensor, inputs: Tuple[Tensor, ...],
               vjp: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]) -> None:
        if self._consumed:
            raise TapeError(f"cannot record {primitive} on a consumed tape")
        output.tape_id = self.tape_id
        self._nodes.append(_Node(primitive, output, inputs, vjp))

    def leaves(self) -> List[Tensor]:
        """Leaf tensors that require gradients and feed this tape."""
        seen: Dict[int, Tensor] = {}
        for node in self._nodes:
            for tensor in node.inputs:
                if tensor.is_leaf and tensor.requires_grad:
                    seen.setdefault(id(tensor), tensor)
        return list(seen.values())

    def backward(self, output: Tensor) -> None:
        """
        Propagate d(output)/d(leaf) into the ``grad`` of every leaf.

        Raises:
            TapeError: If the tape is consumed, empty, or output is not a
                scalar recorded on this tape
        """
        if self._consumed:
            raise TapeError("backward called on an already consumed tape")
        if not self._nodes:
            raise TapeError("backward called before any forward computation was recorded")
        if output.values.size != 1:
            raise TapeError(f"backward requires a scalar output, got shape {output.shape}")
        if output.tape_id != self.tape_id:
            raise TapeError("output was not recorded on this tape")

        leaves = self.leaves()
        for leaf in leaves:
            leaf.grad = np.zeros_like(leaf.values)

        grads: Dict[int, np.ndarray] = {id(output): np.ones_like(output.values)}
        for node in reversed(self._nodes):
            upstream = grads.pop(id(node.output), None)
            if upstream is None:
                continue
            for tensor, grad in zip(node.inputs, node.vjp(upstream)):
                if grad is None or not tensor.requires_grad:
                    continue
                if not np.all(np.isfinite(grad)):
                    raise NumericalError(f"non-finite gradient flowing through {node.primitive}")
                if tensor.is_leaf:
                    tensor.grad = tensor.grad + grad
                else:
                    key = id(tensor)
                    grads[key] = grads[key] + grad if key in grads else grad
        self._consumed = True
        logger.debug(f"Tape {self.tape_id}: backward over {len(self._nodes)} nodes, "
                     f"{len(leaves)} leaves")


def tape_forward(expression: Callable[..., Tensor], *args: Any) -> Tuple[Tape, Tensor]:
    """Evaluate ``expression(*args)`` on a fresh tape; returns (tape, output)."""
    with Tape() as tape:
        output = expression(*args)
    return tape, output


def tape_backward(tape: Tape, output: Tensor) -> None:
    """Functional form of ``Tape.backward``."""
    tape.backward(output)


def _finish(primitive: str, values: np.ndarray, inputs: Tuple[Tensor, ...],
            vjp: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]) -> Tensor:
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"{primitive} produced non-finite values")
    requires_grad = any(t.requires_grad for t in inputs)
    out = Tensor(values, requires_grad=requires_grad)
    tape = active_tape()
    if requires_grad and tape is not None:
        tape.record(primitive, out, inputs, vjp)
    return out


def _broadcast_shape(primitive: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(primitive, a.shape, b.shape) from None


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# Primitives

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('add', a, b)
    return _finish('add', a.values + b.values, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def subtract(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('subtract', a, b)
    return _finish('subtract', a.values - b.values, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def negate(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return _finish('negate', -a.values, (a,), lambda g: (-g,))


def multiply(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('multiply', a, b)
    av, bv = a.values, b.values
    return _finish('multiply', av * bv, (a, b),
                   lambda g: (_unbroadcast(g * bv, a.shape), _unbroadcast(g * av, b.shape)))


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise ShapeError('matmul', a.shape, b.shape)
    av, bv = a.values, b.values

    def vjp(g):
        if av.ndim == 1:
            return g @ bv.T, np.outer(av, g)
        return g @ bv.T, av.T @ g

    return _finish('matmul', av @ bv, (a, b), vjp)


def exp(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over='ignore'):
        out = np.exp(a.values)
    return _finish('exp', out, (a,), lambda g: (g * out,))


def log(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    if np.any(a.values <= 0):
        raise NumericalError(f"log of non-positive value (min {a.values.min()!r})")
    av = a.values
    return _finish('log', np.log(av), (a,), lambda g: (g / av,))


def tanh(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.values)
    return _finish('tanh', out, (a,), lambda g: (g * (1.0 - out * out),))


def arctan(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    av = a.values
    return _finish('arctan', np.arctan(av), (a,), lambda g: (g / (1.0 + av * av),))


def relu(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    mask = a.values > 0
    return _finish('relu', np.where(mask, a.values, 0.0), (a,), lambda g: (g * mask,))


def sum_(a: ArrayLike, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is not None and not -a.ndim <= axis < a.ndim:
        raise ShapeError('sum', a.shape, detail=f"axis {axis} out of range")
    shape = a.shape

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _finish('sum', np.sum(a.values, axis=axis, keepdims=keepdims), (a,), vjp)


def concatenate(tensors: Sequence[ArrayLike], axis: int = -1) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    if not tensors:
        raise ShapeError('concatenate', detail='no operands')
    try:
        out = np.concatenate([t.values for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError('concatenate', *[t.shape for t in tensors]) from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _finish('concatenate', out, tensors,
                   lambda g: tuple(np.split(g, bounds, axis=axis)))


def slice_(a: ArrayLike, index) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.values[index]
    except IndexError as e:
        raise ShapeError('slice', a.shape, detail=str(e)) from None
    shape = a.shape

    def vjp(g):
        full = np.zeros(shape)
        np.add.at(full, index, g)
        return (full,)

    return _finish('slice', np.array(out, dtype=np.float64), (a,), vjp)


def reshape(a: ArrayLike, shape) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.values.reshape(shape)
    except ValueError:
        raise ShapeError('reshape', a.shape, np.atleast_1d(shape)) from None
    original = a.shape
    return _finish('reshape', out, (a,), lambda g: (g.reshape(original),))


# Composed helpers (built only from recorded primitives)

def mean(a: ArrayLike, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.size if axis is None else a.shape[axis]
    return multiply(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


def square(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return multiply(a, a)


def log_softmax(logits: ArrayLike) -> Tensor:
    """Log-softmax over the last axis with a constant max shift."""
    logits = as_tensor(logits)
    shift = Tensor(np.max(logits.values, axis=-1, keepdims=True))
    shifted = subtract(logits, shift)
    return subtract(shifted, log(sum_(exp(shifted), axis=-1, keepdims=True)))


def softmax(logits: ArrayLike) -> Tensor:
    return exp(log_softmax(logits))

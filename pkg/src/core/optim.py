"""
Adam optimizer
"""

from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Tuple
import logging

import numpy as np

from ..utils.errors import NumericalError, ShapeError
from ..utils.validation import ValidationError
from .tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdamState:
    """Moment estimates for one flat parameter array."""
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros(cls, size: int, learning_rate: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, epsilon: float = 1e-8) -> 'AdamState':
        for name, value in (('learning_rate', learning_rate), ('beta1', beta1),
                            ('beta2', beta2), ('epsilon', epsilon)):
            if not value > 0:
                raise ValidationError(f"Adam {name} must be positive, got {value!r}")
        return cls(np.zeros(size), np.zeros(size), 0, learning_rate, beta1, beta2, epsilon)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray,
              name: str = 'params') -> Tuple[np.ndarray, AdamState]:
    """
    Apply one bias-corrected Adam update to a flat parameter array

    Returns:
        Updated parameters and the advanced state

    Raises:
        ShapeError: If params, grads and moments differ in length
        NumericalError: If a gradient entry is not finite
    """
    params = np.asarray(params, dtype=np.float64).ravel()
    grads = np.asarray(grads, dtype=np.float64).ravel()
    if params.size != grads.size or params.size != state.first_moment.size:
        raise ShapeError('adam_step', params.shape, grads.shape, state.first_moment.shape)
    bad = np.flatnonzero(~np.isfinite(grads))
    if bad.size:
        raise NumericalError(f"non-finite gradient for {name} at index {int(bad[0])}")

    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    updated = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return updated, replace(state, first_moment=m, second_moment=v, step_count=t)


class Adam:
    """Adam over a named set of parameter tensors."""

    def __init__(self, params: Mapping[str, Tensor], learning_rate: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        frozen = [name for name, p in params.items() if not p.requires_grad]
        if frozen:
            raise ValidationError(f"Cannot optimise frozen parameters: {', '.join(frozen)}")
        self.params = dict(params)
        self.states: Dict[str, AdamState] = {
            name: AdamState.zeros(p.size, learning_rate, beta1, beta2, epsilon)
            for name, p in self.params.items()
        }
        logger.debug(f"Adam over {len(self.params)} tensors, lr={learning_rate}")

    @property
    def step_count(self) -> int:
        return next(iter(self.states.values())).step_count if self.states else 0

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        """Update every parameter from its ``grad``; a missing grad counts as zero."""
        for name, p in self.params.items():
            grad = p.grad if p.grad is not None else np.zeros_like(p.values)
            updated, self.states[name] = adam_step(self.states[name], p.values, grad, name=name)
            p.values = updated.reshape(p.shape)

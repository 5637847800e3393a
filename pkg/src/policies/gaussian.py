"""
Diagonal Gaussian policy for continuous actions
"""

import math
from typing import Any, Dict, Tuple
import logging

import numpy as np

from ..core import Linear, Mlp, Tensor, as_tensor, exp, square, sum_, tanh
from ..utils.errors import ShapeError
from .base import BasePolicy, PolicyLossKind, _states_2d

logger = logging.getLogger(__name__)

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def squash_log_std(raw: Tensor) -> Tensor:
    """Map an unbounded head output into (LOG_STD_MIN, LOG_STD_MAX)."""
    half_range = 0.5 * (LOG_STD_MAX - LOG_STD_MIN)
    return (tanh(raw) + 1.0) * half_range + LOG_STD_MIN


def raw_log_std_for(log_std: float) -> float:
    """Inverse of ``squash_log_std`` for a single value."""
    if not LOG_STD_MIN < log_std < LOG_STD_MAX:
        raise ValueError(f"log_std {log_std} outside ({LOG_STD_MIN}, {LOG_STD_MAX})")
    half_range = 0.5 * (LOG_STD_MAX - LOG_STD_MIN)
    return math.atanh((log_std - LOG_STD_MIN) / half_range - 1.0)


class GaussianPolicy(BasePolicy):
    """
    ReLU trunk with separate heads for the mean and the log standard deviation.
    """

    kind = 'gaussian'

    def __init__(self, state_dim: int, action_dim: int, hidden_width: int = 64, seed: int = 0,
                 initial_log_std: float = 0.0):
        super().__init__(state_dim, hidden_width, seed)
        self.action_dim = action_dim
        rng = np.random.default_rng(seed)
        self.trunk = Mlp([state_dim, hidden_width, hidden_width], rng, output_activation='relu')
        self.mean_head = Linear(hidden_width, action_dim, rng)
        self.log_std_head = Linear(hidden_width, action_dim, rng)
        self.log_std_head.bias.values[:] = raw_log_std_for(initial_log_std)

    def distribution(self, states) -> Tuple[Tensor, Tensor]:
        """(mean, log_std), each of shape (n, action_dim)."""
        features = self.trunk(_states_2d(states))
        return self.mean_head(features), squash_log_std(self.log_std_head(features))

    def _actions(self, actions, n: int) -> np.ndarray:
        actions = np.asarray(actions.values if isinstance(actions, Tensor) else actions,
                             dtype=np.float64).reshape(n, -1)
        if actions.shape[1] != self.action_dim:
            raise ShapeError('gaussian', actions.shape, (n, self.action_dim))
        return actions

    def log_prob(self, states, actions) -> Tensor:
        states = _states_2d(states)
        actions = self._actions(actions, states.shape[0])
        mean, log_std = self.distribution(states)
        z = (as_tensor(actions) - mean) * exp(-log_std)
        per_dim = square(z) * -0.5 - log_std - _HALF_LOG_2PI
        return sum_(per_dim, axis=1)

    def sample(self, state, rng: np.random.Generator) -> np.ndarray:
        mean, log_std = self.distribution(state)
        return mean.values[0] + np.exp(log_std.values[0]) * rng.standard_normal(self.action_dim)

    def mode(self, state) -> np.ndarray:
        mean, _ = self.distribution(state)
        return mean.values[0].copy()

    def bc_losses(self, states, actions, kind: PolicyLossKind) -> Tensor:
        if kind is PolicyLossKind.NLL:
            return -self.log_prob(states, actions)
        states = _states_2d(states)
        actions = self._actions(actions, states.shape[0])
        mean, _ = self.distribution(states)
        return sum_(square(mean - actions), axis=1) * (1.0 / self.action_dim)

    def action_descriptor(self) -> Dict[str, Any]:
        return {'type': 'continuous', 'dim': self.action_dim}

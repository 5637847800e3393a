"""
Softmax policy over a finite action set
"""

from typing import Any, Dict
import logging

import numpy as np

from ..core import Mlp, Tensor, sum_
from ..utils.errors import EnvError, ShapeError
from .base import BasePolicy, PolicyLossKind, _states_2d

logger = logging.getLogger(__name__)


class CategoricalPolicy(BasePolicy):
    """Two-hidden-layer ReLU network with a softmax over ``n_actions``."""

    kind = 'categorical'

    def __init__(self, state_dim: int, n_actions: int, hidden_width: int = 64, seed: int = 0):
        super().__init__(state_dim, hidden_width, seed)
        if n_actions < 2:
            raise ShapeError('categorical', (n_actions,), detail='need at least two actions')
        self.n_actions = n_actions
        rng = np.random.default_rng(seed)
        self.net = Mlp([state_dim, hidden_width, hidden_width, n_actions], rng,
                       output_activation='softmax')

    def _indices(self, actions, n: int) -> np.ndarray:
        raw = np.asarray(actions.values if isinstance(actions, Tensor) else actions).reshape(-1)
        if raw.size != n:
            raise ShapeError('categorical', (n,), raw.shape, detail='one action per state')
        idx = raw.astype(np.int64)
        if np.any(idx != raw) or np.any(idx < 0) or np.any(idx >= self.n_actions):
            bad = raw[(idx != raw) | (idx < 0) | (idx >= self.n_actions)][0]
            raise EnvError(f"action index {bad!r} out of range [0, {self.n_actions})")
        return idx

    def probabilities(self, states) -> np.ndarray:
        return self.net(_states_2d(states)).values

    def log_prob(self, states, actions) -> Tensor:
        states = _states_2d(states)
        idx = self._indices(actions, states.shape[0])
        one_hot = np.eye(self.n_actions)[idx]
        return sum_(self.net.log_probabilities(states) * one_hot, axis=1)

    def sample(self, state, rng: np.random.Generator) -> int:
        probs = self.probabilities(state)[0]
        return int(rng.choice(self.n_actions, p=probs / probs.sum()))

    def mode(self, state) -> int:
        return int(np.argmax(self.probabilities(state)[0]))

    def bc_losses(self, states, actions, kind: PolicyLossKind) -> Tensor:
        if kind is PolicyLossKind.MSE:
            raise ValueError("mse behavior cloning is not defined for categorical policies")
        return -self.log_prob(states, actions)

    def action_descriptor(self) -> Dict[str, Any]:
        return {'type': 'discrete', 'n': self.n_actions}

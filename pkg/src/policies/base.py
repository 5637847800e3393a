"""
Base policy class and behavior-cloning losses
"""

from abc import abstractmethod
from enum import Enum
from typing import Any, Dict, Optional
import logging

import numpy as np

from ..core import Module, Tensor

logger = logging.getLogger(__name__)


class PolicyLossKind(str, Enum):
    """Behavior-cloning loss used as the policy term."""
    NLL = 'nll'
    MSE = 'mse'


class BasePolicy(Module):
    """Abstract base class for parameterised policies pi_theta(a | s)"""

    kind: str = 'policy'

    def __init__(self, state_dim: int, hidden_width: int, seed: int):
        self.state_dim = state_dim
        self.hidden_width = hidden_width
        self.seed = seed
        logger.debug(f"Initializing {self.__class__.__name__} (state_dim={state_dim})")

    @abstractmethod
    def log_prob(self, states, actions) -> Tensor:
        """
        Log-density of actions given states

        Returns:
            Tensor of shape (n,), differentiable w.r.t. the parameters
        """
        pass

    @abstractmethod
    def sample(self, state: np.ndarray, rng: np.random.Generator):
        """Draw one action for a single state."""
        pass

    @abstractmethod
    def mode(self, state: np.ndarray):
        """Most likely action for a single state."""
        pass

    @abstractmethod
    def bc_losses(self, states, actions, kind: PolicyLossKind) -> Tensor:
        """Per-sample behavior-cloning losses, shape (n,)."""
        pass

    @abstractmethod
    def action_descriptor(self) -> Dict[str, Any]:
        pass

    def act(self, state: np.ndarray, rng: Optional[np.random.Generator] = None,
            deterministic: bool = True):
        """Mode action when deterministic, otherwise a sample."""
        if deterministic or rng is None:
            return self.mode(state)
        return self.sample(state, rng)

    def metadata(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'state_dim': self.state_dim,
            'hidden_width': self.hidden_width,
            'seed': self.seed,
            'action_space': self.action_descriptor(),
        }


def _states_2d(states) -> np.ndarray:
    states = np.asarray(states.values if isinstance(states, Tensor) else states, dtype=np.float64)
    return states.reshape(1, -1) if states.ndim == 1 else states


def policy_log_prob(policy: BasePolicy, states, actions) -> Tensor:
    return policy.log_prob(states, actions)


def policy_sample(policy: BasePolicy, state: np.ndarray, seed: int, deterministic: bool = False):
    """Draw an action for one state, reproducibly per seed."""
    if deterministic:
        return policy.mode(state)
    return policy.sample(state, np.random.default_rng(seed))


def bc_loss(policy: BasePolicy, states, actions, kind: PolicyLossKind = PolicyLossKind.NLL) -> Tensor:
    """Mean behavior-cloning loss over a non-empty batch."""
    if len(actions) == 0:
        raise ValueError("bc_loss needs a non-empty batch")
    return policy.bc_losses(states, actions, PolicyLossKind(kind)).mean()


def policy_loss_sum(policy: BasePolicy, states, actions,
                    kind: PolicyLossKind = PolicyLossKind.NLL) -> Tensor:
    """Summed behavior-cloning loss, the policy term of the training objective."""
    if len(actions) == 0:
        raise ValueError("policy_loss_sum needs a non-empty batch")
    return policy.bc_losses(states, actions, PolicyLossKind(kind)).sum()

"""
Base classes for built-in environments and their experts
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple
import logging

import numpy as np

from ..utils.errors import EnvError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnvDescriptor:
    """Dimensions, action space and construction parameters of an environment."""
    name: str
    state_dim: int
    action_type: str
    n_actions: int = 0
    action_dim: int = 0
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.action_type not in ('discrete', 'continuous'):
            raise EnvError(f"Unknown action type {self.action_type!r}")

    @property
    def is_discrete(self) -> bool:
        return self.action_type == 'discrete'

    @property
    def action_width(self) -> int:
        """Width of an encoded action (one-hot for discrete spaces)."""
        return self.n_actions if self.is_discrete else self.action_dim

    @property
    def action_space(self) -> Dict[str, Any]:
        if self.is_discrete:
            return {'type': 'discrete', 'n': self.n_actions}
        return {'type': 'continuous', 'dim': self.action_dim}

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'state_dim': self.state_dim,
            'action': self.action_space,
            'params': dict(self.params),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'EnvDescriptor':
        action = data['action']
        return cls(
            name=data['name'],
            state_dim=int(data['state_dim']),
            action_type=action['type'],
            n_actions=int(action.get('n', 0)),
            action_dim=int(action.get('dim', 0)),
            params=dict(data.get('params', {})),
        )


@dataclass
class Episode:
    """One rollout. Rewards are kept for evaluation only, never for datasets."""
    states: List[np.ndarray]
    actions: List[Any]
    rewards: List[float]
    absorbed: bool = False

    @property
    def total_return(self) -> float:
        return float(sum(self.rewards))

    def __len__(self) -> int:
        return len(self.actions)


class BaseEnvironment(ABC):
    """
    Abstract base class for environments with known transition densities.

    Environments hold no episode state: ``step`` maps an explicit state and
    action to the next state, so episodes can run in parallel.
    """

    name = 'environment'
    default_horizon = 100

    def __init__(self):
        logger.debug(f"Initializing {self.__class__.__name__}")

    @property
    @abstractmethod
    def descriptor(self) -> EnvDescriptor:
        pass

    @abstractmethod
    def reset(self, rng: np.random.Generator) -> np.ndarray:
        """Draw an initial state."""
        pass

    @abstractmethod
    def step(self, state: np.ndarray, action, rng: np.random.Generator) -> Tuple[np.ndarray, float, bool]:
        """
        Advance one step

        Returns:
            (next_state, reward, done)
        """
        pass

    @abstractmethod
    def true_transition_logpdf(self, state: np.ndarray, action, next_state: np.ndarray) -> float:
        """Exact log T(s' | s, a)."""
        pass

    @abstractmethod
    def sample_action(self, rng: np.random.Generator):
        """Uniformly random valid action."""
        pass

    def clip_action(self, action):
        """Project a policy output onto the action space."""
        return action

    def rollout(self, act: Callable[[np.ndarray, np.random.Generator], Any],
                rng: np.random.Generator, horizon: Optional[int] = None) -> Episode:
        """
        Run one episode with an action function

        Args:
            act: Maps (state, rng) to an action
            rng: Generator owning all randomness of the episode
            horizon: Maximum number of steps (defaults to ``default_horizon``)
        """
        horizon = horizon or self.default_horizon
        state = self.reset(rng)
        episode = Episode(states=[], actions=[], rewards=[])
        for _ in range(horizon):
            action = act(state, rng)
            next_state, reward, done = self.step(state, action, rng)
            episode.states.append(state)
            episode.actions.append(action)
            episode.rewards.append(reward)
            if done:
                episode.absorbed = True
                break
            state = next_state
        return episode


class ExpertPolicy(ABC):
    """Demonstration policy pi_D with a closed-form conditional density."""

    @abstractmethod
    def log_prob(self, state: np.ndarray, action) -> float:
        pass

    @abstractmethod
    def sample(self, state: np.ndarray, rng: np.random.Generator):
        pass

    def act(self, state: np.ndarray, rng: np.random.Generator):
        return self.sample(state, rng)


def env_reset(env: BaseEnvironment, seed: int) -> np.ndarray:
    return env.reset(np.random.default_rng(seed))


def env_step(env: BaseEnvironment, state: np.ndarray, action, seed: int) -> Tuple[np.ndarray, float, bool]:
    return env.step(state, action, np.random.default_rng(seed))


def expert_policy_logpdf(expert: ExpertPolicy, state: np.ndarray, action) -> float:
    return expert.log_prob(state, action)

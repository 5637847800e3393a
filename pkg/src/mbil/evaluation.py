"""
Policy evaluation by environment rollouts
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union
import logging

import numpy as np

from ..envs.base import BaseEnvironment, ExpertPolicy
from ..policies import BasePolicy
from ..utils.validation import validate_positive_int

logger = logging.getLogger(__name__)

Seed = Union[int, Sequence[int]]


@dataclass(frozen=True)
class EvalResult:
    """Episode returns of one evaluation."""
    returns: Tuple[float, ...]

    @property
    def n_episodes(self) -> int:
        return len(self.returns)

    @property
    def mean(self) -> float:
        return float(np.mean(self.returns))

    @property
    def std(self) -> float:
        return float(np.std(self.returns))

    @property
    def median(self) -> float:
        return float(np.median(self.returns))

    def to_dict(self):
        return {'episodes': self.n_episodes, 'return_mean': self.mean,
                'return_std': self.std, 'return_median': self.median}


def run_episodes(env: BaseEnvironment, act: Callable, episodes: int, seed: Seed,
                 horizon: Optional[int] = None) -> EvalResult:
    """
    Roll out ``act`` for a number of episodes

    Every episode owns a generator spawned from ``seed``, so results do not
    depend on the episode count or on execution order.
    """
    validate_positive_int('episodes', episodes)
    streams = np.random.SeedSequence(seed).spawn(episodes)
    returns = tuple(env.rollout(act, np.random.default_rng(s), horizon).total_return for s in streams)
    return EvalResult(returns=returns)


def evaluate_policy(policy: BasePolicy, env: BaseEnvironment, episodes: int, seed: Seed,
                    deterministic: bool = True, horizon: Optional[int] = None) -> EvalResult:
    """Average return of a policy; actions are projected onto the action space."""
    def act(state, rng):
        return env.clip_action(policy.act(state, rng, deterministic=deterministic))

    result = run_episodes(env, act, episodes, seed, horizon)
    logger.debug(f"Evaluated {policy.kind} policy on {env.name}: "
                 f"{result.mean:.3f} +/- {result.std:.3f} over {episodes} episodes")
    return result


def evaluate_expert(expert: ExpertPolicy, env: BaseEnvironment, episodes: int, seed: Seed,
                    horizon: Optional[int] = None) -> EvalResult:
    return run_episodes(env, expert.act, episodes, seed, horizon)


def evaluate_random(env: BaseEnvironment, episodes: int, seed: Seed,
                    horizon: Optional[int] = None) -> EvalResult:
    return run_episodes(env, lambda state, rng: env.sample_action(rng), episodes, seed, horizon)


def normalized_score(value: float, expert_value: float, random_value: float) -> float:
    """(value - random) / (expert - random); 1 means expert level."""
    span = expert_value - random_value
    if span == 0:
        raise ValueError("Expert and random baselines coincide")
    return (value - random_value) / span

"""
Expert demonstration generation
"""

from typing import Optional
import logging

import numpy as np

from .base import BaseEnvironment, ExpertPolicy

logger = logging.getLogger(__name__)


def generate_demonstrations(env: BaseEnvironment, expert: ExpertPolicy, n_trajectories: int,
                            horizon: Optional[int] = None, seed: int = 0):
    """
    Roll out the expert and keep only (s, a) pairs

    Each trajectory draws from its own generator spawned from ``seed``, so
    trajectory ``i`` does not depend on how many others are generated.

    Returns:
        Dataset whose trajectory ids are 0..n_trajectories-1
    """
    from ..data.dataset import Dataset, Trajectory

    if n_trajectories < 1:
        raise ValueError(f"n_trajectories must be at least 1, got {n_trajectories}")
    streams = np.random.SeedSequence(seed).spawn(n_trajectories)
    discrete = env.descriptor.is_discrete
    trajectories = []
    returns = []
    for traj_id, stream in enumerate(streams):
        episode = env.rollout(expert.act, np.random.default_rng(stream), horizon)
        actions = np.array(episode.actions, dtype=np.int64 if discrete else np.float64)
        trajectories.append(Trajectory(traj_id, np.array(episode.states), actions))
        returns.append(episode.total_return)
    logger.info(f"Generated {n_trajectories} {env.name} demonstrations "
                f"(mean expert return {np.mean(returns):.3f})")
    return Dataset(env.descriptor, tuple(trajectories))

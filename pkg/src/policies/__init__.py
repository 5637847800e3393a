"""
Parameterised policies and behavior-cloning losses
"""

from pathlib import Path
from typing import Any, Mapping, Union

from ..core import load_checkpoint, save_checkpoint
from ..utils.errors import CheckpointError
from .base import (
    BasePolicy,
    PolicyLossKind,
    bc_loss,
    policy_log_prob,
    policy_loss_sum,
    policy_sample
)
from .categorical import CategoricalPolicy
from .gaussian import GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN, raw_log_std_for, squash_log_std

POLICY_KIND = 'policy'


def build_policy(state_dim: int, action_space: Mapping[str, Any], hidden_width: int = 64,
                 seed: int = 0) -> BasePolicy:
    """Create the policy family that matches an action-space descriptor."""
    if action_space['type'] == 'discrete':
        return CategoricalPolicy(state_dim, int(action_space['n']), hidden_width, seed)
    if action_space['type'] == 'continuous':
        return GaussianPolicy(state_dim, int(action_space['dim']), hidden_width, seed)
    raise ValueError(f"Unknown action space type {action_space['type']!r}")


def save_policy(policy: BasePolicy, path: Union[str, Path]) -> Path:
    return save_checkpoint(path, POLICY_KIND, policy.state_dict(), metadata=policy.metadata())


def load_policy(path: Union[str, Path]) -> BasePolicy:
    header, arrays = load_checkpoint(path, kind=POLICY_KIND)
    meta = header['metadata']
    policy = build_policy(meta['state_dim'], meta['action_space'], meta['hidden_width'],
                          meta.get('seed', 0))
    if policy.kind != meta['kind']:
        raise CheckpointError(f"{path}: policy kind {meta['kind']!r} does not match its action space")
    policy.load_state_dict(arrays)
    policy.freeze()
    return policy


__all__ = [
    'BasePolicy',
    'PolicyLossKind',
    'CategoricalPolicy',
    'GaussianPolicy',
    'bc_loss',
    'policy_log_prob',
    'policy_loss_sum',
    'policy_sample',
    'build_policy',
    'save_policy',
    'load_policy',
    'squash_log_std',
    'raw_log_std_for',
    'LOG_STD_MIN',
    'LOG_STD_MAX'
]

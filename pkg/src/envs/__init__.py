"""
Built-in environments with exact transition densities and experts
"""

from .base import (
    BaseEnvironment,
    EnvDescriptor,
    Episode,
    ExpertPolicy,
    env_reset,
    env_step,
    expert_policy_logpdf
)
from .gridworld import ACTION_NAMES, GridWorld, GridWorldExpert
from .point_mass import PointMass, PointMassExpert
from .demonstrations import generate_demonstrations
from .balance import state_action_balance_check, state_balance_check
from .registry import ENVIRONMENTS, env_from_descriptor, make_env, make_expert


def true_transition_logpdf(env: BaseEnvironment, state, action, next_state) -> float:
    return env.true_transition_logpdf(state, action, next_state)


__all__ = [
    'BaseEnvironment',
    'EnvDescriptor',
    'Episode',
    'ExpertPolicy',
    'env_reset',
    'env_step',
    'expert_policy_logpdf',
    'true_transition_logpdf',
    'ACTION_NAMES',
    'GridWorld',
    'GridWorldExpert',
    'PointMass',
    'PointMassExpert',
    'generate_demonstrations',
    'state_balance_check',
    'state_action_balance_check',
    'ENVIRONMENTS',
    'env_from_descriptor',
    'make_env',
    'make_expert'
]

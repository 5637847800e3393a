"""
Lookup of built-in environments and their experts by name
"""

from typing import Any, Dict, Type
import logging

from ..utils.errors import EnvError
from .base import BaseEnvironment, EnvDescriptor, ExpertPolicy
from .gridworld import GridWorld, GridWorldExpert
from .point_mass import PointMass, PointMassExpert

logger = logging.getLogger(__name__)

ENVIRONMENTS: Dict[str, Type[BaseEnvironment]] = {
    GridWorld.name: GridWorld,
    PointMass.name: PointMass,
}


def make_env(name: str, **params: Any) -> BaseEnvironment:
    """
    Instantiate a built-in environment

    Raises:
        EnvError: For unknown names or parameters
    """
    if name not in ENVIRONMENTS:
        raise EnvError(f"Unknown environment {name!r}; choose one of {sorted(ENVIRONMENTS)}")
    try:
        return ENVIRONMENTS[name](**params)
    except TypeError as e:
        raise EnvError(f"Invalid parameters for {name}: {e}") from e


def env_from_descriptor(descriptor: EnvDescriptor) -> BaseEnvironment:
    """Rebuild the environment recorded in a dataset or checkpoint header."""
    return make_env(descriptor.name, **descriptor.params)


def make_expert(env: BaseEnvironment, **params: Any) -> ExpertPolicy:
    """Scripted or computed demonstration policy for a built-in environment."""
    if isinstance(env, GridWorld):
        return GridWorldExpert(env, epsilon=params.get('epsilon', 0.05))
    if isinstance(env, PointMass):
        return PointMassExpert(env, k_p=params.get('k_p', 1.0),
                               noise_std=params.get('noise_std', 0.05))
    raise EnvError(f"No expert available for {env.name}")

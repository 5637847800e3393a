"""
Frozen conditional densities used by the dynamics term

Two targets are modelled:

* ``chain``  - P(s', a' | s, a), the state-action chain of the demonstrator
* ``kernel`` - T(s' | s, a), the environment transition kernel
"""

from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union
import logging
import math

import numpy as np

from ..data.buffer import Batch, Buffer, decode_actions, encode_chain, encode_kernel
from ..envs.base import BaseEnvironment, EnvDescriptor, ExpertPolicy
from ..flows import DensityFitConfig, FitResult, FlowModel, fit_density, load_flow, save_flow
from ..utils.errors import EnvError

logger = logging.getLogger(__name__)

CHAIN = 'chain'
KERNEL = 'kernel'
TARGETS = (CHAIN, KERNEL)
DENSITY_KINDS = ('flow', 'tabular', 'oracle')


@dataclass(frozen=True)
class FlowSettings:
    """Architecture of a flow density."""
    n_blocks: int = 4
    hidden_width: int = 64
    clamp: float = 2.0
    cond_width: Optional[int] = None


class TransitionDensity(ABC):
    """Frozen log-density over buffer tuples for one target."""

    kind = 'density'

    def __init__(self, descriptor: EnvDescriptor, target: str):
        if target not in TARGETS:
            raise ValueError(f"Unknown density target {target!r}")
        self.descriptor = descriptor
        self.target = target

    @property
    def frozen(self) -> bool:
        return True

    def encode(self, states, actions, next_states, next_actions=None) -> Tuple[np.ndarray, np.ndarray]:
        if self.target == CHAIN:
            return encode_chain(states, actions, next_states, next_actions, self.descriptor)
        return encode_kernel(states, actions, next_states, self.descriptor)

    def log_prob(self, states, actions, next_states, next_actions=None) -> np.ndarray:
        """Per-tuple log-density, shape (n,)."""
        return self.log_prob_encoded(*self.encode(states, actions, next_states, next_actions))

    @abstractmethod
    def log_prob_encoded(self, x: np.ndarray, c: np.ndarray) -> np.ndarray:
        pass

    def batch_log_prob(self, batch: Batch) -> np.ndarray:
        return self.log_prob(batch.states, batch.actions, batch.next_states, batch.next_actions)


class FlowDensity(TransitionDensity):
    """Conditional flow fitted by maximum likelihood."""

    kind = 'flow'

    def __init__(self, model: FlowModel, descriptor: EnvDescriptor, target: str,
                 chunk_size: int = 4096):
        super().__init__(descriptor, target)
        self.model = model
        self.chunk_size = chunk_size

    @property
    def frozen(self) -> bool:
        return self.model.frozen

    def log_prob_encoded(self, x: np.ndarray, c: np.ndarray) -> np.ndarray:
        return np.concatenate([
            self.model.log_prob(x[i:i + self.chunk_size], c[i:i + self.chunk_size]).values
            for i in range(0, len(x), self.chunk_size)
        ]) if len(x) else np.zeros(0)

    @classmethod
    def fit(cls, buffer: Buffer, target: str, fit_config: DensityFitConfig,
            settings: FlowSettings = FlowSettings()) -> Tuple['FlowDensity', FitResult]:
        x, c = buffer.chain_data() if target == CHAIN else buffer.kernel_data()
        model = FlowModel(x.shape[1], c.shape[1], n_blocks=settings.n_blocks,
                          hidden_width=settings.hidden_width, clamp=settings.clamp,
                          cond_width=settings.cond_width, seed=fit_config.seed)
        logger.info(f"Fitting {target} flow on {len(x)} tuples")
        result = fit_density(model, (x, c), fit_config)
        return cls(result.model, buffer.descriptor, target), result

    def save(self, path: Union[str, Path]) -> Path:
        return save_flow(self.model, path)

    @classmethod
    def load(cls, path: Union[str, Path], descriptor: EnvDescriptor, target: str) -> 'FlowDensity':
        return cls(load_flow(path), descriptor, target)


def _row_key(row: np.ndarray) -> Tuple[float, ...]:
    return tuple(float(v) for v in row)


class TabularDensity(TransitionDensity):
    """
    Empirical conditional frequencies over exact encoded rows.

    Only meaningful for discrete environments; unseen rows score ``-inf``.
    """

    kind = 'tabular'

    def __init__(self, descriptor: EnvDescriptor, target: str,
                 joint: Dict[Tuple, int], marginal: Dict[Tuple, int]):
        super().__init__(descriptor, target)
        self.joint = joint
        self.marginal = marginal

    @classmethod
    def fit(cls, buffer: Buffer, target: str) -> 'TabularDensity':
        if not buffer.descriptor.is_discrete:
            raise EnvError(f"Tabular densities need a discrete environment, got {buffer.descriptor.name}")
        x, c = buffer.chain_data() if target == CHAIN else buffer.kernel_data()
        joint = Counter((_row_key(ci), _row_key(xi)) for xi, ci in zip(x, c))
        marginal = Counter(_row_key(ci) for ci in c)
        logger.info(f"Tabular {target} density over {len(marginal)} conditions, {len(joint)} outcomes")
        return cls(buffer.descriptor, target, dict(joint), dict(marginal))

    def log_prob_encoded(self, x: np.ndarray, c: np.ndarray) -> np.ndarray:
        out = np.empty(len(x))
        for i, (xi, ci) in enumerate(zip(x, c)):
            key = _row_key(ci)
            count = self.joint.get((key, _row_key(xi)), 0)
            out[i] = math.log(count / self.marginal[key]) if count else -math.inf
        return out


class OracleDensity(TransitionDensity):
    """Exact log-densities from an environment and its expert."""

    kind = 'oracle'

    def __init__(self, env: BaseEnvironment, expert: Optional[ExpertPolicy], target: str):
        super().__init__(env.descriptor, target)
        if target == CHAIN and expert is None:
            raise ValueError("The chain oracle needs the demonstration policy")
        self.env = env
        self.expert = expert

    def log_prob(self, states, actions, next_states, next_actions=None) -> np.ndarray:
        out = np.empty(len(states))
        for i in range(len(states)):
            value = self.env.true_transition_logpdf(states[i], actions[i], next_states[i])
            if self.target == CHAIN:
                value += self.expert.log_prob(next_states[i], next_actions[i])
            out[i] = value
        return out

    def log_prob_encoded(self, x: np.ndarray, c: np.ndarray) -> np.ndarray:
        state_dim = self.descriptor.state_dim
        x = np.asarray(x, dtype=np.float64)
        c = np.asarray(c, dtype=np.float64)
        states, actions = c[:, :state_dim], decode_actions(c[:, state_dim:], self.descriptor)
        next_states = x[:, :state_dim]
        next_actions = decode_actions(x[:, state_dim:], self.descriptor) if self.target == CHAIN else None
        return self.log_prob(states, actions, next_states, next_actions)


class PrecomputedDensity(TransitionDensity):
    """Log-densities of one buffer, evaluated once and looked up by tuple index."""

    def __init__(self, density: TransitionDensity, buffer: Buffer):
        super().__init__(density.descriptor, density.target)
        self.source = density
        self.kind = density.kind
        self.values = density.log_prob(buffer.states, buffer.actions,
                                       buffer.next_states, buffer.next_actions)

    def log_prob_encoded(self, x: np.ndarray, c: np.ndarray) -> np.ndarray:
        return self.source.log_prob_encoded(x, c)

    def log_prob(self, states, actions, next_states, next_actions=None) -> np.ndarray:
        return self.source.log_prob(states, actions, next_states, next_actions)

    def batch_log_prob(self, batch: Batch) -> np.ndarray:
        return self.values[batch.tuple_indices]


def build_density(kind: str, target: str, buffer: Buffer,
                  fit_config: Optional[DensityFitConfig] = None,
                  settings: FlowSettings = FlowSettings(),
                  env: Optional[BaseEnvironment] = None,
                  expert: Optional[ExpertPolicy] = None) -> Tuple[TransitionDensity, Optional[FitResult]]:
    """
    Build one frozen density of the requested kind

    Returns:
        (density, fit result for flows or None)
    """
    if kind == 'flow':
        return FlowDensity.fit(buffer, target, fit_config or DensityFitConfig(), settings)
    if kind == 'tabular':
        return TabularDensity.fit(buffer, target), None
    if kind == 'oracle':
        if env is None:
            raise ValueError("Oracle densities need the environment")
        return OracleDensity(env, expert, target), None
    raise ValueError(f"Unknown density kind {kind!r}; choose one of {DENSITY_KINDS}")

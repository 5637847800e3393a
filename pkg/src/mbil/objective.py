"""
Training objective: balance-based dynamics term plus behavior cloning
"""

from dataclasses import dataclass, field
from typing import Optional, Union
import logging

import numpy as np

from ..core import Tensor, as_tensor, square, sum_
from ..data.buffer import Batch
from ..flows import DensityFitConfig
from ..policies import BasePolicy, PolicyLossKind, policy_loss_sum
from ..utils.errors import NumericalError
from ..utils.validation import ValidationError, validate_loss_weights, validate_positive_int
from .densities import DENSITY_KINDS, FlowSettings, TransitionDensity

logger = logging.getLogger(__name__)

Scalar = Union[float, np.ndarray, Tensor]


@dataclass(frozen=True)
class MbilConfig:
    """
    Settings of one training run

    ``alpha`` weighs the dynamics term and ``beta`` the behavior-cloning
    term; at least one of them must be positive.
    """
    alpha: float = 0.001
    beta: float = 1.0
    policy_loss: PolicyLossKind = PolicyLossKind.NLL
    iterations: int = 20000
    batch_size: int = 256
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    hidden_width: int = 64
    seed: int = 0
    eval_every: int = 500
    eval_episodes: int = 10
    eval_deterministic: bool = True
    select: str = 'final'
    log_every: int = 100
    progress: bool = False
    density_kind: str = 'flow'
    flow: FlowSettings = field(default_factory=FlowSettings)
    chain_fit: DensityFitConfig = field(default_factory=DensityFitConfig)
    kernel_fit: DensityFitConfig = field(default_factory=DensityFitConfig)

    def __post_init__(self):
        validate_loss_weights(self.alpha, self.beta)
        object.__setattr__(self, 'policy_loss', PolicyLossKind(self.policy_loss))
        validate_positive_int('iterations', self.iterations)
        validate_positive_int('batch_size', self.batch_size)
        validate_positive_int('log_every', self.log_every)
        if self.eval_every < 0:
            raise ValidationError(f"eval_every must be >= 0, got {self.eval_every}")
        if self.select not in ('final', 'best'):
            raise ValidationError(f"select must be 'final' or 'best', got {self.select!r}")
        if self.density_kind not in DENSITY_KINDS:
            raise ValidationError(f"density_kind must be one of {DENSITY_KINDS}, got {self.density_kind!r}")

    @property
    def uses_dynamics(self) -> bool:
        return self.alpha > 0


@dataclass
class ObjectiveTerms:
    """Weighted total plus the two unweighted sums it is made of."""
    total: Tensor
    dynamics: Optional[Tensor]
    policy: Optional[Tensor]

    @property
    def dyn_loss(self) -> float:
        return self.dynamics.item() if self.dynamics is not None else 0.0

    @property
    def pol_loss(self) -> float:
        return self.policy.item() if self.policy is not None else 0.0


def balance_residual(p_log: Scalar, pi_log: Scalar, t_log: Scalar) -> Scalar:
    """(log P - log pi - log T)^2, elementwise; differentiable when given Tensors."""
    if any(isinstance(v, Tensor) for v in (p_log, pi_log, t_log)):
        return square(as_tensor(p_log) - pi_log - t_log)
    return (np.asarray(p_log, dtype=np.float64) - pi_log - t_log) ** 2


def _checked(values: np.ndarray, batch: Batch, name: str) -> np.ndarray:
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        index = int(batch.tuple_indices[bad[0]])
        raise NumericalError(f"{name} density is {values[bad[0]]} on tuple {index}")
    return values


def dynamics_loss(batch: Batch, policy: BasePolicy, p_hat: TransitionDensity,
                  t_hat: TransitionDensity) -> Tensor:
    """Sum of balance residuals over the batch tuples."""
    if batch.n_tuples == 0:
        raise ValueError("dynamics_loss needs a non-empty tuple batch")
    for density in (p_hat, t_hat):
        if not density.frozen:
            raise ValueError(f"{density.target} density must be frozen before policy training")
    p_log = _checked(p_hat.batch_log_prob(batch), batch, 'chain')
    t_log = _checked(t_hat.batch_log_prob(batch), batch, 'kernel')
    pi_log = policy.log_prob(batch.next_states, batch.next_actions)
    return sum_(balance_residual(p_log, pi_log, t_log))


def objective_terms(batch: Batch, policy: BasePolicy, p_hat: Optional[TransitionDensity],
                    t_hat: Optional[TransitionDensity], config: MbilConfig) -> ObjectiveTerms:
    """
    Evaluate alpha * dynamics + beta * policy on one batch

    A zero weight skips its term entirely, so no density is touched when
    ``alpha`` is 0.
    """
    dynamics = policy_term = None
    total = None
    if config.alpha > 0:
        dynamics = dynamics_loss(batch, policy, p_hat, t_hat)
        total = dynamics * config.alpha
    if config.beta > 0:
        policy_term = policy_loss_sum(policy, batch.bc_states, batch.bc_actions, config.policy_loss)
        weighted = policy_term * config.beta
        total = weighted if total is None else total + weighted
    return ObjectiveTerms(total=total, dynamics=dynamics, policy=policy_term)


def mbil_objective(batch: Batch, policy: BasePolicy, p_hat: Optional[TransitionDensity],
                   t_hat: Optional[TransitionDensity], config: MbilConfig) -> Tensor:
    return objective_terms(batch, policy, p_hat, t_hat, config).total

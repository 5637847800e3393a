"""
Policy training: density fitting followed by the optimisation loop
"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union
import logging

import numpy as np
from tqdm import tqdm

from ..core import Adam, Tape
from ..data.buffer import Buffer, batch_iter, build_tuples
from ..data.dataset import Dataset
from ..envs.base import BaseEnvironment, EnvDescriptor, ExpertPolicy
from ..flows import FitResult
from ..policies import BasePolicy, build_policy, save_policy
from ..utils.errors import DatasetError, NumericalError, TrainingDivergedError
from ..utils.formatting import REPORT_COLUMNS, write_csv
from .densities import CHAIN, KERNEL, PrecomputedDensity, TransitionDensity, build_density
from .evaluation import EvalResult, evaluate_policy
from .objective import MbilConfig, objective_terms

logger = logging.getLogger(__name__)

# Evaluation episodes draw from SeedSequence((seed, EVAL_STREAM)), apart from batch sampling
EVAL_STREAM = 1


@dataclass
class IterationRecord:
    iteration: int
    dyn_loss: float
    pol_loss: float
    total: float


@dataclass
class TrainReport:
    """Per-iteration losses, periodic evaluations and the saved policy."""
    records: List[IterationRecord] = field(default_factory=list)
    evaluations: Dict[int, EvalResult] = field(default_factory=dict)
    selected_iteration: Optional[int] = None
    checkpoint: Optional[Path] = None
    interrupted: bool = False
    density_fits: Dict[str, FitResult] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final_evaluation(self) -> Optional[EvalResult]:
        if not self.evaluations:
            return None
        return self.evaluations[max(self.evaluations)]

    @property
    def selected_evaluation(self) -> Optional[EvalResult]:
        if self.selected_iteration is None:
            return self.final_evaluation
        return self.evaluations.get(self.selected_iteration)

    def rows(self) -> List[Dict[str, Any]]:
        rows = []
        for record in self.records:
            evaluation = self.evaluations.get(record.iteration)
            rows.append({
                'iteration': record.iteration,
                'dyn_loss': record.dyn_loss,
                'pol_loss': record.pol_loss,
                'total': record.total,
                'eval_return_mean': evaluation.mean if evaluation else None,
                'eval_return_std': evaluation.std if evaluation else None,
            })
        return rows

    def to_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(path, REPORT_COLUMNS, self.rows())


def _check_descriptor(dataset: Dataset, descriptor: EnvDescriptor) -> None:
    if (dataset.descriptor.state_dim != descriptor.state_dim
            or dataset.descriptor.action_space != descriptor.action_space):
        raise DatasetError(f"Dataset has state_dim {dataset.descriptor.state_dim} and action "
                           f"{dataset.descriptor.action_space}; environment expects state_dim "
                           f"{descriptor.state_dim} and action {descriptor.action_space}")


def fit_transition_densities(buffer: Buffer, config: MbilConfig,
                             env: Optional[BaseEnvironment] = None,
                             expert: Optional[ExpertPolicy] = None
                             ) -> Tuple[TransitionDensity, TransitionDensity, Dict[str, FitResult]]:
    """
    Fit and freeze the chain density P and the kernel density T

    Returns:
        (P, T, fit results keyed by target for flow densities)
    """
    if buffer.n_tuples == 0:
        raise DatasetError("The dynamics term needs trajectories with at least two steps")
    fits: Dict[str, FitResult] = {}
    densities = []
    for target, fit_config in ((CHAIN, config.chain_fit), (KERNEL, config.kernel_fit)):
        density, fit = build_density(config.density_kind, target, buffer, fit_config,
                                     config.flow, env=env, expert=expert)
        if fit is not None:
            fits[target] = fit
        densities.append(density)
    return densities[0], densities[1], fits


class PolicyTrainer:
    """Runs the optimisation loop for one policy."""

    def __init__(self, config: MbilConfig, env: Optional[BaseEnvironment] = None):
        """
        Initialize the trainer

        Args:
            config: Run settings
            env: Environment used for periodic evaluation; None disables it
        """
        self.config = config
        self.env = env
        logger.debug(f"Initialized PolicyTrainer alpha={config.alpha} beta={config.beta} "
                     f"iterations={config.iterations} batch_size={config.batch_size}")

    def _evaluate(self, policy: BasePolicy) -> EvalResult:
        return evaluate_policy(policy, self.env, self.config.eval_episodes,
                               seed=(self.config.seed, EVAL_STREAM),
                               deterministic=self.config.eval_deterministic)

    def optimize(self, policy: BasePolicy, buffer: Buffer,
                 p_hat: Optional[TransitionDensity] = None,
                 t_hat: Optional[TransitionDensity] = None,
                 report: Optional[TrainReport] = None) -> TrainReport:
        """
        Minimise the objective with Adam on the policy parameters

        Ctrl-C stops the loop early; the partial report is returned and
        marked as interrupted.

        Raises:
            TrainingDivergedError: If a loss or gradient becomes non-finite
        """
        config = self.config
        report = report if report is not None else TrainReport()
        if config.uses_dynamics:
            p_hat = PrecomputedDensity(p_hat, buffer)
            t_hat = PrecomputedDensity(t_hat, buffer)
        batches = batch_iter(buffer, config.batch_size, config.seed, tuples=config.uses_dynamics)
        optimizer = Adam(policy.named_parameters(), config.learning_rate,
                         config.beta1, config.beta2, config.epsilon)
        evaluate = self.env is not None and config.eval_every > 0
        best_value, best_params = -np.inf, None

        logger.info(f"Training {policy.kind} policy for {config.iterations} iterations "
                    f"(alpha={config.alpha}, beta={config.beta}, loss={config.policy_loss.value})")
        iteration = 0
        try:
            for iteration in tqdm(range(1, config.iterations + 1), desc='policy',
                                  disable=not config.progress):
                batch = next(batches)
                try:
                    with Tape() as tape:
                        terms = objective_terms(batch, policy, p_hat, t_hat, config)
                    total = terms.total.item()
                    if not np.isfinite(total):
                        raise NumericalError(f"objective is {total}")
                    tape.backward(terms.total)
                    optimizer.step()
                except NumericalError as e:
                    logger.error(f"Training diverged at iteration {iteration}: {e}")
                    raise TrainingDivergedError(f"policy training diverged: {e}", iteration, report) from e

                record = IterationRecord(iteration, terms.dyn_loss, terms.pol_loss, total)
                report.records.append(record)
                if iteration % config.log_every == 0:
                    logger.debug(f"iteration {iteration}: dyn_loss={record.dyn_loss:.4f} "
                                 f"pol_loss={record.pol_loss:.4f} total={total:.4f}")

                if evaluate and (iteration % config.eval_every == 0 or iteration == config.iterations):
                    result = self._evaluate(policy)
                    report.evaluations[iteration] = result
                    logger.info(f"iteration {iteration}: dyn_loss={record.dyn_loss:.4f} "
                                f"pol_loss={record.pol_loss:.4f} total={total:.4f} "
                                f"eval_return_mean={result.mean:.3f}")
                    if result.mean > best_value:
                        best_value, best_params = result.mean, policy.parameter_vector()
                        report.selected_iteration = iteration

        except KeyboardInterrupt:
            logger.info(f"Training stopped by user after {iteration} iterations")
            report.interrupted = True

        if config.select == 'best' and best_params is not None:
            policy.load_parameter_vector(best_params)
            logger.info(f"Selected iterate {report.selected_iteration} (eval return {best_value:.3f})")
        else:
            report.selected_iteration = len(report.records)
        return report


def _train(dataset: Dataset, env_descriptor: EnvDescriptor, config: MbilConfig,
           env: Optional[BaseEnvironment], expert: Optional[ExpertPolicy],
           checkpoint_path: Optional[Union[str, Path]]) -> Tuple[BasePolicy, TrainReport]:
    _check_descriptor(dataset, env_descriptor)
    buffer = build_tuples(dataset)
    report = TrainReport()
    p_hat = t_hat = None
    if config.uses_dynamics:
        p_hat, t_hat, report.density_fits = fit_transition_densities(buffer, config, env, expert)

    policy = build_policy(env_descriptor.state_dim, env_descriptor.action_space,
                          config.hidden_width, config.seed)
    report = PolicyTrainer(config, env).optimize(policy, buffer, p_hat, t_hat, report)
    if checkpoint_path is not None:
        report.checkpoint = save_policy(policy, checkpoint_path)
    return policy, report


def train(dataset: Dataset, env_descriptor: EnvDescriptor, config: MbilConfig,
          env: Optional[BaseEnvironment] = None, expert: Optional[ExpertPolicy] = None,
          checkpoint_path: Optional[Union[str, Path]] = None) -> Tuple[BasePolicy, TrainReport]:
    """
    Fit the transition densities, freeze them and train a policy

    Args:
        dataset: Reward-free demonstrations
        env_descriptor: Dimensions the dataset must match
        config: Run settings
        env: Environment for periodic evaluation and oracle densities
        expert: Demonstration policy, only needed for oracle densities
        checkpoint_path: Where to save the selected policy

    Returns:
        (policy, report)
    """
    return _train(dataset, env_descriptor, config, env, expert, checkpoint_path)


def train_bc(dataset: Dataset, env_descriptor: EnvDescriptor, config: MbilConfig,
             env: Optional[BaseEnvironment] = None,
             checkpoint_path: Optional[Union[str, Path]] = None) -> Tuple[BasePolicy, TrainReport]:
    """Behavior cloning alone: the same loop with alpha=0 and beta=1."""
    return _train(dataset, env_descriptor, replace(config, alpha=0.0, beta=1.0), env, None,
                  checkpoint_path)

"""
Experiment commands behind the command-line interface
"""

from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union
import logging
import math

import numpy as np

from ..data import build_tuples, load_dataset, save_dataset
from ..envs import generate_demonstrations
from ..flows import save_flow
from ..mbil import (
    CHAIN,
    KERNEL,
    FlowDensity,
    OracleDensity,
    balance_residual,
    evaluate_expert,
    evaluate_policy,
    evaluate_random,
    normalized_score,
    train
)
from ..policies import load_policy
from ..utils.errors import CheckpointError, DatasetError, MbilError
from ..utils.formatting import METRICS_COLUMNS, SUMMARY_COLUMNS, write_csv
from ..utils.runlog import log_run_context
from ..utils.validation import ValidationError
from .config import RESOLVED_NAME, ExperimentConfig, dump_config, load_config, resolve_config
from .sweep import RunOutcome, RunSpec, run_parallel, summarize

logger = logging.getLogger(__name__)

POLICY_FILE = 'policy.npz'
REPORT_FILE = 'report.csv'
METRICS_FILE = 'metrics.csv'
SUMMARY_FILE = 'summary.csv'
FLOW_FILES = {CHAIN: 'chain_flow.npz', KERNEL: 'kernel_flow.npz'}


def _pool_path(config: ExperimentConfig, out: Path) -> Path:
    if config.dataset.path:
        return Path(config.dataset.path)
    return out / f"expert_{config.env.name}_{config.pool_fingerprint()}.jsonl"


def cmd_gen_expert(config: ExperimentConfig, out: Union[str, Path]) -> Dict[str, Any]:
    """
    Generate the expert trajectory pool and score the expert

    Returns:
        Dataset path, sizes and expert/random return statistics
    """
    out = Path(out)
    env = config.env.make_env()
    expert = config.env.make_expert(env)
    dataset = generate_demonstrations(env, expert, config.dataset.pool_size,
                                      config.dataset.horizon, seed=config.dataset.seed)
    path = save_dataset(dataset, _pool_path(config, out))
    dump_config(config, out / RESOLVED_NAME)

    episodes = config.evaluation.episodes
    expert_eval = evaluate_expert(expert, env, episodes, seed=config.run.seeds[0])
    random_eval = evaluate_random(env, episodes, seed=config.run.seeds[0])
    result = {
        'dataset': str(path),
        'n_trajectories': len(dataset),
        'n_pairs': dataset.n_pairs,
        'expert': expert_eval.to_dict(),
        'random': random_eval.to_dict(),
    }
    if hasattr(expert, 'expected_return'):
        result['expert']['expected_return'] = expert.expected_return()
    return result


def _ensure_pool(config: ExperimentConfig, out: Path) -> Path:
    path = _pool_path(config, out)
    if config.dataset.path:
        if not path.exists():
            raise DatasetError(f"Trajectory file not found: {path}")
        return path
    if not path.exists():
        logger.info(f"No expert pool at {path}; generating {config.dataset.pool_size} trajectories")
        cmd_gen_expert(config, out)
    return path


def _metrics_rows(run_id: str, seed: int, report, log_every: int) -> List[Dict[str, Any]]:
    rows = []
    for row in report.rows():
        if row['iteration'] % log_every and row['eval_return_mean'] is None:
            continue
        rows.append({'run_id': run_id, 'seed': seed, **row})
    return rows


def execute_run(spec: RunSpec) -> RunOutcome:
    """
    Train one policy and write its run directory

    The directory holds the policy checkpoint, fitted flows, the full
    per-iteration report, metrics rows and the resolved configuration.
    """
    config = spec.config
    run_dir = Path(spec.out_root) / spec.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    env = config.env.make_env()
    expert = config.env.make_expert(env)
    pool = load_dataset(spec.dataset_path, env.descriptor)
    dataset = pool.subsample(spec.n_trajectories, spec.seed)

    tree = config.to_dict()
    tree['run']['seeds'], tree['run']['n_seeds'] = [spec.seed], 1
    tree['dataset']['n_trajectories'] = spec.n_trajectories
    tree['dataset']['path'] = str(spec.dataset_path)
    dump_config(resolve_config(tree), run_dir / RESOLVED_NAME)

    logger.info(f"Run {spec.run_id}: {spec.n_trajectories} trajectories {dataset.traj_ids}")
    try:
        policy, report = train(dataset, env.descriptor, config.mbil_config(spec.seed), env=env,
                               expert=expert, checkpoint_path=run_dir / POLICY_FILE)
    except MbilError as e:
        logger.error(f"Run {spec.run_id} failed: {e}")
        raise
    for target, fit in report.density_fits.items():
        save_flow(fit.model, run_dir / FLOW_FILES[target])
    report.to_csv(run_dir / REPORT_FILE)
    metrics = _metrics_rows(spec.run_id, spec.seed, report, config.mbil.log_every)
    write_csv(run_dir / METRICS_FILE, METRICS_COLUMNS, metrics)

    evaluation = report.selected_evaluation
    return RunOutcome(
        run_id=spec.run_id,
        group=spec.group,
        seed=spec.seed,
        n_trajectories=spec.n_trajectories,
        alpha=config.mbil.alpha,
        beta=config.mbil.beta,
        run_dir=str(run_dir),
        return_mean=evaluation.mean if evaluation else None,
        return_std=evaluation.std if evaluation else None,
        metrics=metrics,
    )


def _run_all(specs: List[RunSpec], config: ExperimentConfig, out: Path) -> List[RunOutcome]:
    outcomes = run_parallel(execute_run, specs, config.run.workers)
    write_csv(out / METRICS_FILE, METRICS_COLUMNS, [row for o in outcomes for row in o.metrics])
    write_csv(out / SUMMARY_FILE, SUMMARY_COLUMNS, summarize(outcomes))
    dump_config(config, out / RESOLVED_NAME)
    return outcomes


def _outcome_dict(outcome: RunOutcome) -> Dict[str, Any]:
    return {'run_id': outcome.run_id, 'seed': outcome.seed, 'run_dir': outcome.run_dir,
            'return_mean': outcome.return_mean, 'return_std': outcome.return_std}


def cmd_train(config: ExperimentConfig, out: Union[str, Path]) -> Dict[str, Any]:
    """Train one policy per seed on ``dataset.n_trajectories`` expert trajectories."""
    out = Path(out)
    pool = _ensure_pool(config, out)
    specs = [RunSpec('train', config, seed, config.dataset.n_trajectories, str(pool), str(out), 'train')
             for seed in config.run.seeds]
    outcomes = _run_all(specs, config, out)
    return {'runs': [_outcome_dict(o) for o in outcomes], 'summary': summarize(outcomes)}


def cmd_ablate(config: ExperimentConfig, out: Union[str, Path]) -> Dict[str, Any]:
    """
    Run every (alpha, beta) pair of the ablation grid over all seeds

    Each pair also gets its own CSV with the metrics of all its seeds.
    """
    out = Path(out)
    pool = _ensure_pool(config, out)
    specs = []
    for alpha, beta in config.ablation_grid:
        weighted = config.with_weights(alpha, beta)
        group = f"alpha={alpha:g},beta={beta:g}"
        specs.extend(RunSpec('ablate', weighted, seed, config.dataset.n_trajectories, str(pool),
                             str(out), group) for seed in config.run.seeds)
    outcomes = _run_all(specs, config, out)

    files = []
    for alpha, beta in config.ablation_grid:
        group = f"alpha={alpha:g},beta={beta:g}"
        rows = [row for o in outcomes if o.group == group for row in o.metrics]
        files.append(str(write_csv(out / f"ablation_alpha{alpha:g}_beta{beta:g}.csv",
                                   METRICS_COLUMNS, rows)))
    return {'files': files, 'summary': summarize(outcomes)}


def cmd_sweep(config: ExperimentConfig, out: Union[str, Path]) -> Dict[str, Any]:
    """Dataset-size sweep: every size in ``dataset.sizes`` times every seed."""
    out = Path(out)
    too_large = [n for n in config.dataset.sizes if n > config.dataset.pool_size]
    if too_large and not config.dataset.path:
        raise ValidationError(f"dataset.sizes {too_large} exceed dataset.pool_size {config.dataset.pool_size}")
    pool = _ensure_pool(config, out)
    specs = [RunSpec('sweep', config, seed, size, str(pool), str(out), f"n={size}")
             for size in config.dataset.sizes for seed in config.run.seeds]
    outcomes = _run_all(specs, config, out)
    return {'n_runs': len(outcomes), 'summary': summarize(outcomes)}


def cmd_evaluate(checkpoint: Union[str, Path], config: ExperimentConfig,
                 episodes: Optional[int] = None, seed: Optional[int] = None) -> Dict[str, Any]:
    """
    Score a saved policy against the expert and a uniformly random policy

    Raises:
        CheckpointError: If the policy does not fit the environment
    """
    env = config.env.make_env()
    policy = load_policy(checkpoint)
    descriptor = env.descriptor
    if policy.state_dim != descriptor.state_dim or policy.action_descriptor() != descriptor.action_space:
        raise CheckpointError(f"{checkpoint} was trained for state_dim {policy.state_dim} and "
                              f"action {policy.action_descriptor()}, not {descriptor.name}")
    episodes = episodes or config.evaluation.episodes
    seed = config.run.seeds[0] if seed is None else seed
    result = evaluate_policy(policy, env, episodes, seed, config.evaluation.deterministic)
    expert_result = evaluate_expert(config.env.make_expert(env), env, episodes, seed)
    random_result = evaluate_random(env, episodes, seed)
    try:
        score = normalized_score(result.mean, expert_result.mean, random_result.mean)
    except ValueError:
        score = None
    return {
        'checkpoint': str(checkpoint),
        'policy': result.to_dict(),
        'expert': expert_result.to_dict(),
        'random': random_result.to_dict(),
        'normalized_score': score,
    }


def _held_out_buffer(config: ExperimentConfig, env, expert, n_tuples: int):
    horizon = config.dataset.horizon
    n_trajectories = max(1, math.ceil(n_tuples / max(1, horizon - 1)))
    while True:
        dataset = generate_demonstrations(env, expert, n_trajectories, horizon,
                                          seed=config.dataset.seed + 1)
        buffer = build_tuples(dataset)
        if buffer.n_tuples >= n_tuples:
            return buffer
        n_trajectories *= 2


def cmd_density_check(run_dir: Union[str, Path]) -> Dict[str, Any]:
    """
    Compare a run's fitted flows with the exact densities on fresh expert tuples

    Reports held-out NLL of both flows and of the exact densities, the mean
    absolute log-density error, and the mean balance residual of the flows
    under the true demonstration policy.
    """
    run_dir = Path(run_dir)
    resolved = run_dir / RESOLVED_NAME
    if not resolved.exists():
        raise CheckpointError(f"{run_dir} has no {RESOLVED_NAME}")
    config = resolve_config(load_config(resolved))
    missing = [name for name in FLOW_FILES.values() if not (run_dir / name).exists()]
    if missing:
        raise CheckpointError(f"{run_dir} has no fitted flows ({', '.join(missing)})")

    env = config.env.make_env()
    expert = config.env.make_expert(env)
    buffer = _held_out_buffer(config, env, expert, config.evaluation.check_tuples)
    idx = np.arange(config.evaluation.check_tuples)
    s, a = buffer.states[idx], buffer.actions[idx]
    s_next, a_next = buffer.next_states[idx], buffer.next_actions[idx]

    report: Dict[str, Any] = {'run_dir': str(run_dir), 'n_tuples': len(idx)}
    log_densities = {}
    for target in (CHAIN, KERNEL):
        flow = FlowDensity.load(run_dir / FLOW_FILES[target], env.descriptor, target)
        fitted = flow.log_prob(s, a, s_next, a_next)
        exact = OracleDensity(env, expert, target).log_prob(s, a, s_next, a_next)
        log_densities[target] = fitted
        report[target] = {
            'nll': float(-np.mean(fitted)),
            'oracle_nll': float(-np.mean(exact)),
            'mean_abs_log_error': float(np.mean(np.abs(fitted - exact))),
        }
    expert_log = np.array([expert.log_prob(sn, an) for sn, an in zip(s_next, a_next)])
    report['balance_residual_mean'] = float(np.mean(
        balance_residual(log_densities[CHAIN], expert_log, log_densities[KERNEL])))
    return report


class ExperimentRunner:
    """Dispatches experiment commands with shared configuration and logging."""

    def __init__(self, config: ExperimentConfig, out: Optional[Union[str, Path]] = None):
        """
        Initialize the runner

        Args:
            config: Resolved experiment configuration
            out: Output directory (defaults to ``run.out``)
        """
        self.config = config
        self.out = Path(out or config.run.out)
        self.commands: Dict[str, Callable[..., Dict[str, Any]]] = {
            'gen-expert': lambda: cmd_gen_expert(self.config, self.out),
            'train': lambda: cmd_train(self.config, self.out),
            'ablate': lambda: cmd_ablate(self.config, self.out),
            'sweep': lambda: cmd_sweep(self.config, self.out),
            'evaluate': lambda checkpoint, episodes=None, seed=None:
                cmd_evaluate(checkpoint, self.config, episodes, seed),
            'density-check': lambda run_dir: cmd_density_check(run_dir),
        }
        logger.debug(f"Initialized ExperimentRunner with output directory {self.out}")

    def run(self, command: str, **options: Any) -> Dict[str, Any]:
        if command not in self.commands:
            raise ValidationError(f"Unknown command {command!r}")
        log_run_context(logger, command, self.config.to_dict())
        return self.commands[command](**options)

"""
Multi-run execution and cross-seed summaries
"""

from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar
import logging
import re

import numpy as np

from .config import ExperimentConfig

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def _slug(text: str) -> str:
    return re.sub(r'[^A-Za-z0-9.]+', '-', text).strip('-').lower()


@dataclass(frozen=True)
class RunSpec:
    """One training run of a multi-run command."""
    command: str
    config: ExperimentConfig
    seed: int
    n_trajectories: int
    dataset_path: str
    out_root: str
    group: str

    @property
    def run_id(self) -> str:
        """
        Readable slug plus a hash of everything that shapes the run

        Identical settings always map to the same directory name.
        """
        digest = self.config.fingerprint(command=self.command, seed=self.seed,
                                         n_trajectories=self.n_trajectories,
                                         dataset=self.dataset_path)
        slug = _slug(f"{self.command}-{self.config.env.name}-a{self.config.mbil.alpha:g}"
                     f"-b{self.config.mbil.beta:g}-n{self.n_trajectories}-s{self.seed}")
        return f"{slug}-{digest}"


@dataclass
class RunOutcome:
    """What a finished run reports back to its command."""
    run_id: str
    group: str
    seed: int
    n_trajectories: int
    alpha: float
    beta: float
    run_dir: str
    return_mean: Optional[float]
    return_std: Optional[float]
    metrics: List[Dict[str, Any]] = field(default_factory=list)


def run_parallel(function: Callable[[T], R], specs: Sequence[T], workers: int = 1) -> List[R]:
    """
    Apply ``function`` to every spec, in worker processes when ``workers > 1``

    Results keep the order of ``specs``.
    """
    specs = list(specs)
    if workers <= 1 or len(specs) <= 1:
        return [function(spec) for spec in specs]
    processes = min(workers, len(specs))
    logger.info(f"Running {len(specs)} runs on {processes} worker processes")
    with Pool(processes) as pool:
        return pool.map(function, specs)


def summarize(outcomes: Sequence[RunOutcome]) -> List[Dict[str, Any]]:
    """
    Mean, standard deviation and median of final returns per group

    Groups appear in the order of their first run; runs without an
    evaluation are left out of the statistics.
    """
    groups: Dict[str, List[RunOutcome]] = {}
    for outcome in outcomes:
        groups.setdefault(outcome.group, []).append(outcome)
    rows = []
    for group, members in groups.items():
        returns = [m.return_mean for m in members if m.return_mean is not None]
        first = members[0]
        rows.append({
            'group': group,
            'n_trajectories': first.n_trajectories,
            'alpha': first.alpha,
            'beta': first.beta,
            'n_runs': len(members),
            'return_mean': float(np.mean(returns)) if returns else None,
            'return_std': float(np.std(returns)) if returns else None,
            'return_median': float(np.median(returns)) if returns else None,
        })
    return rows

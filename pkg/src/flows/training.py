"""
Maximum-likelihood fitting of conditional flows with Gaussian-noise regularisation
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
from tqdm import tqdm

from ..core import Adam, Tape
from ..utils.errors import DensityTrainingError, NumericalError, ShapeError
from ..utils.validation import validate_non_negative, validate_positive_int
from .model import FlowModel, mean_nll

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DensityFitConfig:
    """Settings for one density fit."""
    steps: int = 3000
    batch_size: int = 256
    noise_sigma: float = 0.01
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    log_every: int = 500
    progress: bool = False

    def __post_init__(self):
        validate_positive_int('steps', self.steps)
        validate_positive_int('batch_size', self.batch_size)
        validate_non_negative('noise_sigma', self.noise_sigma)
        validate_positive_int('log_every', self.log_every)


@dataclass
class FitResult:
    """Outcome of ``fit_density``: the frozen model and its training curve."""
    model: FlowModel
    final_nll: float
    history: List[float] = field(default_factory=list)


def _as_arrays(data) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(data, tuple) and len(data) == 2 and isinstance(data[0], np.ndarray):
        x, c = data
    else:
        pairs = list(data)
        if not pairs:
            raise ValueError("fit_density needs at least one (x, c) sample")
        x = np.array([p[0] for p in pairs], dtype=np.float64)
        c = np.array([p[1] for p in pairs], dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if c.ndim == 1:
        c = c[:, None]
    return x, c


def fit_density(model: FlowModel, data: Union[Tuple[np.ndarray, np.ndarray], Sequence],
                config: DensityFitConfig) -> FitResult:
    """
    Fit a flow by minimising the mean NLL of noise-perturbed minibatches

    Fresh Gaussian noise with standard deviation ``noise_sigma`` is added
    to both ``x`` and ``c`` at every step. The model is frozen on return.

    Args:
        model: Flow to train in place
        data: ``(x, c)`` arrays or a sequence of ``(x, c)`` pairs
        config: Fit settings

    Returns:
        FitResult with the frozen model and the final NLL on the clean data

    Raises:
        DensityTrainingError: If a loss or gradient becomes non-finite
    """
    x, c = _as_arrays(data)
    if x.shape[0] < 1:
        raise ValueError("fit_density needs at least one (x, c) sample")
    if x.shape[1] != model.x_dim or c.shape[1] != model.c_dim or x.shape[0] != c.shape[0]:
        raise ShapeError('fit_density', x.shape, c.shape,
                         detail=f"model expects x_dim={model.x_dim}, c_dim={model.c_dim}")
    if config.noise_sigma == 0:
        logger.warning("noise_sigma=0: fitting without noise is unstable on degenerate data")

    rng = np.random.default_rng(config.seed)
    optimizer = Adam(model.named_parameters(), config.learning_rate,
                     config.beta1, config.beta2, config.epsilon)
    n = x.shape[0]
    history: List[float] = []

    logger.info(f"Fitting flow (x_dim={model.x_dim}, c_dim={model.c_dim}) on {n} samples "
                f"for {config.steps} steps, noise_sigma={config.noise_sigma}")
    steps = tqdm(range(config.steps), desc='density', disable=not config.progress)
    for step in steps:
        idx = rng.integers(0, n, size=config.batch_size)
        xb = x[idx] + config.noise_sigma * rng.standard_normal((idx.size, model.x_dim))
        cb = c[idx] + config.noise_sigma * rng.standard_normal((idx.size, model.c_dim))
        try:
            with Tape() as tape:
                loss = -model.log_prob(xb, cb).mean()
            tape.backward(loss)
            optimizer.step()
        except NumericalError as e:
            raise DensityTrainingError(f"density fit diverged: {e}", step,
                                       idx.tolist()) from e

        value = loss.item()
        history.append(value)
        if (step + 1) % config.log_every == 0:
            logger.debug(f"density step {step + 1}: nll={value:.4f}")
            if config.progress:
                steps.set_postfix({'nll': f"{value:.4f}"})

    model.noise_sigma = config.noise_sigma
    model.freeze()
    final = mean_nll(model, x, c)
    logger.info(f"Flow fit finished: train NLL {final:.4f}")
    return FitResult(model=model, final_nll=final, history=history)

"""
Conditional normalizing flow

A conditioning encoder maps ``c`` to ``c~``; one adapter per coupling block
maps ``c~`` to that block's conditioning ``c_i``. The flow pushes ``x``
forward through the blocks to a standard normal latent ``z`` and the exact
conditional log-likelihood follows from the change of variables.
"""

import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union
import logging

import numpy as np

from ..core import Module, Mlp, Tensor, as_tensor, load_checkpoint, save_checkpoint, square, sum_
from ..utils.errors import NumericalError, ShapeError
from .coupling import CouplingBlock

logger = logging.getLogger(__name__)

FLOW_KIND = 'conditional-flow'
SPLIT_SCHEME = 'halves-alternating'
_LOG_2PI = math.log(2.0 * math.pi)


class FlowModel(Module):
    """
    Conditional density p(x | c) built from GLOW-style coupling blocks.

    Args:
        x_dim: Dimension of the modelled variable
        c_dim: Dimension of the conditioning variable
        n_blocks: Number of coupling blocks
        hidden_width: Width of every hidden layer in encoder, adapters and subnets
        clamp: Bound on each scale exponent
        cond_width: Width of ``c~`` and each ``c_i``; defaults to max(8, c_dim)
        seed: Initialisation seed
    """

    def __init__(self, x_dim: int, c_dim: int, n_blocks: int = 4, hidden_width: int = 64,
                 clamp: float = 2.0, cond_width: Optional[int] = None, seed: int = 0,
                 noise_sigma: Optional[float] = None):
        if x_dim < 1 or c_dim < 1 or n_blocks < 1:
            raise ShapeError('flow', (x_dim, c_dim, n_blocks),
                             detail='x_dim, c_dim and n_blocks must be >= 1')
        self.x_dim = x_dim
        self.c_dim = c_dim
        self.n_blocks = n_blocks
        self.hidden_width = hidden_width
        self.clamp = float(clamp)
        self.cond_width = cond_width or max(8, c_dim)
        self.seed = seed
        # Recorded for the checkpoint header once the model has been fitted
        self.noise_sigma = noise_sigma

        rng = np.random.default_rng(seed)
        h, w = hidden_width, self.cond_width
        self.encoder = Mlp([c_dim, h, h, w], rng)
        self.adapters = [Mlp([w, h, h, w], rng) for _ in range(n_blocks)]
        self.blocks = [CouplingBlock(i, x_dim, w, h, self.clamp, rng) for i in range(n_blocks)]
        logger.debug(f"FlowModel x_dim={x_dim} c_dim={c_dim} blocks={n_blocks} "
                     f"params={self.num_parameters()}")

    def _prepare(self, x, c) -> Tuple[Tensor, Tensor]:
        x, c = as_tensor(x), as_tensor(c)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if c.ndim == 1:
            c = c.reshape(1, -1)
        if x.shape[1] != self.x_dim:
            raise ShapeError('flow', x.shape, (self.x_dim,), detail='x_dim mismatch')
        if c.shape[1] != self.c_dim:
            raise ShapeError('flow', c.shape, (self.c_dim,), detail='c_dim mismatch')
        if c.shape[0] != x.shape[0]:
            raise ShapeError('flow', x.shape, c.shape, detail='batch sizes differ')
        if not (np.all(np.isfinite(x.values)) and np.all(np.isfinite(c.values))):
            raise NumericalError("flow input contains non-finite values")
        return x, c

    def conditions(self, c: Tensor) -> List[Tensor]:
        """Per-block conditioning ``c_i``."""
        encoded = self.encoder(c)
        return [adapter(encoded) for adapter in self.adapters]

    def forward(self, x, c) -> Tuple[Tensor, Tensor]:
        """
        Push x to the latent space

        Returns:
            (z, logdet) where logdet has shape (n,)
        """
        x, c = self._prepare(x, c)
        logdet = None
        for block, c_i in zip(self.blocks, self.conditions(c)):
            x, block_logdet = block.forward(x, c_i)
            logdet = block_logdet if logdet is None else logdet + block_logdet
        return x, logdet

    def inverse(self, z, c) -> Tensor:
        z, c = self._prepare(z, c)
        for block, c_i in reversed(list(zip(self.blocks, self.conditions(c)))):
            z = block.inverse(z, c_i)
        return z

    def log_prob(self, x, c) -> Tensor:
        """Per-sample log p(x | c), shape (n,)."""
        z, logdet = self.forward(x, c)
        base = sum_(square(z), axis=1) * -0.5 - 0.5 * self.x_dim * _LOG_2PI
        return base + logdet

    def sample(self, c, n: int, seed: int) -> np.ndarray:
        """
        Draw n samples of x

        Args:
            c: One conditioning vector (tiled n times) or an (n, c_dim) array
            n: Number of draws
            seed: RNG seed for the latent draws
        """
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        c = np.asarray(c.values if isinstance(c, Tensor) else c, dtype=np.float64)
        if c.ndim == 1:
            c = np.tile(c, (n, 1))
        if c.shape[0] != n:
            raise ShapeError('sample', c.shape, (n, self.c_dim))
        z = np.random.default_rng(seed).standard_normal((n, self.x_dim))
        return self.inverse(z, c).values

    def config(self) -> Dict[str, Any]:
        return {
            'x_dim': self.x_dim,
            'c_dim': self.c_dim,
            'n_blocks': self.n_blocks,
            'hidden_width': self.hidden_width,
            'clamp': self.clamp,
            'cond_width': self.cond_width,
            'split': SPLIT_SCHEME,
            'noise_sigma': self.noise_sigma,
            'seed': self.seed,
        }


def log_prob(model: FlowModel, x, c) -> Tensor:
    return model.log_prob(x, c)


def sample(model: FlowModel, c, n: int, seed: int) -> np.ndarray:
    return model.sample(c, n, seed)


def mean_nll(model: FlowModel, x: np.ndarray, c: np.ndarray, batch_size: int = 4096) -> float:
    """Mean negative log-likelihood over a dataset, evaluated without a tape."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    c = np.atleast_2d(np.asarray(c, dtype=np.float64))
    total = 0.0
    for start in range(0, x.shape[0], batch_size):
        stop = start + batch_size
        total += float(np.sum(model.log_prob(x[start:stop], c[start:stop]).values))
    return -total / x.shape[0]


def save_flow(model: FlowModel, path: Union[str, Path]) -> Path:
    return save_checkpoint(path, FLOW_KIND, model.state_dict(), metadata=model.config())


def load_flow(path: Union[str, Path]) -> FlowModel:
    header, arrays = load_checkpoint(path, kind=FLOW_KIND)
    meta = header['metadata']
    model = FlowModel(meta['x_dim'], meta['c_dim'], n_blocks=meta['n_blocks'],
                      hidden_width=meta['hidden_width'], clamp=meta['clamp'],
                      cond_width=meta['cond_width'], seed=meta.get('seed', 0),
                      noise_sigma=meta.get('noise_sigma'))
    model.load_state_dict(arrays)
    model.freeze()
    return model

"""
Conditional double affine coupling block
"""

import math
from typing import Tuple
import logging

import numpy as np

from ..core import Module, Mlp, Tensor, arctan, as_tensor, concatenate, exp, sum_
from ..utils.errors import ShapeError

logger = logging.getLogger(__name__)


def soft_clamp(raw: Tensor, clamp: float) -> Tensor:
    """Bound scale exponents to (-clamp, clamp) with ``clamp * 2/pi * atan(raw/clamp)``."""
    return arctan(raw * (1.0 / clamp)) * (clamp * 2.0 / math.pi)


class CouplingBlock(Module):
    """
    Affine coupling conditioned on an adapter output ``c_i``.

    The second half is transformed from the first half and ``c_i``, then the
    first half from the new second half and ``c_i``. Even blocks take the
    leading ``ceil(d/2)`` coordinates as the first half; odd blocks swap the
    roles. With ``x_dim == 1`` the single coordinate gets an affine map whose
    scale and shift depend on ``c_i`` alone.
    """

    def __init__(self, index: int, x_dim: int, cond_dim: int, hidden_width: int,
                 clamp: float, rng: np.random.Generator):
        if x_dim < 1:
            raise ShapeError('coupling', (x_dim,), detail='x_dim must be >= 1')
        if clamp <= 0:
            raise ValueError(f"clamp must be positive, got {clamp!r}")
        self.index = index
        self.x_dim = x_dim
        self.cond_dim = cond_dim
        self.clamp = float(clamp)

        if x_dim == 1:
            self.first = self.second = None
            self.subnet_a = None
            self.subnet_b = Mlp([cond_dim, hidden_width, hidden_width, 2], rng, zero_output=True)
            return

        lower = slice(0, (x_dim + 1) // 2)
        upper = slice((x_dim + 1) // 2, x_dim)
        self.first, self.second = (lower, upper) if index % 2 == 0 else (upper, lower)
        n_first = self.first.stop - self.first.start
        n_second = self.second.stop - self.second.start
        # subnet_b transforms the second half, subnet_a the first
        self.subnet_b = Mlp([n_first + cond_dim, hidden_width, hidden_width, 2 * n_second],
                            rng, zero_output=True)
        self.subnet_a = Mlp([n_second + cond_dim, hidden_width, hidden_width, 2 * n_first],
                            rng, zero_output=True)

    @property
    def split(self) -> Tuple[int, int]:
        if self.first is None:
            return (1, 0)
        return (self.first.stop - self.first.start, self.second.stop - self.second.start)

    def _check(self, x: Tensor, c_i: Tensor) -> None:
        if x.ndim != 2 or x.shape[1] != self.x_dim:
            raise ShapeError('coupling', x.shape, (self.x_dim,), detail='x_dim mismatch')
        if c_i.ndim != 2 or c_i.shape[1] != self.cond_dim or c_i.shape[0] != x.shape[0]:
            raise ShapeError('coupling', c_i.shape, (x.shape[0], self.cond_dim),
                             detail='conditioning mismatch')

    def _scale_shift(self, net: Mlp, inputs: Tensor, width: int) -> Tuple[Tensor, Tensor]:
        out = net(inputs)
        return soft_clamp(out[:, :width], self.clamp), out[:, width:]

    def _merge(self, first: Tensor, second: Tensor) -> Tensor:
        if self.first.start == 0:
            return concatenate([first, second], axis=1)
        return concatenate([second, first], axis=1)

    def forward(self, x: Tensor, c_i: Tensor) -> Tuple[Tensor, Tensor]:
        """
        Map x to y

        Returns:
            (y, logdet) with logdet of shape (n,)
        """
        x, c_i = as_tensor(x), as_tensor(c_i)
        self._check(x, c_i)
        if self.first is None:
            s, t = self._scale_shift(self.subnet_b, c_i, 1)
            return x * exp(s) + t, sum_(s, axis=1)

        n_first, n_second = self.split
        x1, x2 = x[:, self.first], x[:, self.second]
        s2, t2 = self._scale_shift(self.subnet_b, concatenate([x1, c_i], axis=1), n_second)
        y2 = x2 * exp(s2) + t2
        s1, t1 = self._scale_shift(self.subnet_a, concatenate([y2, c_i], axis=1), n_first)
        y1 = x1 * exp(s1) + t1
        return self._merge(y1, y2), sum_(s1, axis=1) + sum_(s2, axis=1)

    def inverse(self, y: Tensor, c_i: Tensor) -> Tensor:
        """Exact algebraic inverse of ``forward``."""
        y, c_i = as_tensor(y), as_tensor(c_i)
        self._check(y, c_i)
        if self.first is None:
            s, t = self._scale_shift(self.subnet_b, c_i, 1)
            return (y - t) * exp(-s)

        n_first, n_second = self.split
        y1, y2 = y[:, self.first], y[:, self.second]
        s1, t1 = self._scale_shift(self.subnet_a, concatenate([y2, c_i], axis=1), n_first)
        x1 = (y1 - t1) * exp(-s1)
        s2, t2 = self._scale_shift(self.subnet_b, concatenate([x1, c_i], axis=1), n_second)
        x2 = (y2 - t2) * exp(-s2)
        return self._merge(x1, x2)


def coupling_forward(block: CouplingBlock, x: Tensor, c_i: Tensor) -> Tuple[Tensor, Tensor]:
    return block.forward(x, c_i)


def coupling_inverse(block: CouplingBlock, y: Tensor, c_i: Tensor) -> Tensor:
    return block.inverse(y, c_i)

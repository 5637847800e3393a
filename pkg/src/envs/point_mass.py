"""
Planar point mass with linear-Gaussian dynamics
"""

from typing import Tuple
import logging

import numpy as np
from scipy.stats import multivariate_normal

from ..utils.errors import EnvError
from .base import BaseEnvironment, EnvDescriptor, ExpertPolicy

logger = logging.getLogger(__name__)


class PointMass(BaseEnvironment):
    """
    s' = clip(s + a * dt + noise, -bound, bound), noise ~ N(0, noise_std^2 I)

    Actions live in [-1, 1]^2 and the reward is -||s|| of the current state.
    Episodes never terminate before the horizon.
    """

    name = 'point_mass'
    state_dim = 2
    action_dim = 2
    action_low = -1.0
    action_high = 1.0

    def __init__(self, dt: float = 0.1, noise_std: float = 0.1, bound: float = 2.0,
                 start_range: float = 0.75, horizon: int = 100):
        super().__init__()
        if dt <= 0:
            raise EnvError(f"dt must be positive, got {dt}")
        if noise_std < 0:
            raise EnvError(f"noise_std must be non-negative, got {noise_std}")
        if not 0 < start_range < bound:
            raise EnvError(f"start_range must lie in (0, {bound}), got {start_range}")
        self.dt = float(dt)
        self.noise_std = float(noise_std)
        self.bound = float(bound)
        self.start_range = float(start_range)
        self.default_horizon = horizon

    @property
    def descriptor(self) -> EnvDescriptor:
        return EnvDescriptor(
            name=self.name, state_dim=self.state_dim, action_type='continuous',
            action_dim=self.action_dim,
            params={'dt': self.dt, 'noise_std': self.noise_std, 'bound': self.bound,
                    'start_range': self.start_range, 'horizon': self.default_horizon})

    def _state(self, state) -> np.ndarray:
        state = np.asarray(state, dtype=np.float64).reshape(-1)
        if state.size != self.state_dim or not np.all(np.isfinite(state)):
            raise EnvError(f"Point mass state must be a finite 2-vector, got {state}")
        return state

    def validate_action(self, action) -> np.ndarray:
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.size != self.action_dim or not np.all(np.isfinite(action)):
            raise EnvError(f"Point mass action must be a finite 2-vector, got {action}")
        if np.any(action < self.action_low) or np.any(action > self.action_high):
            raise EnvError(f"Action {action.tolist()} out of range [{self.action_low}, {self.action_high}]")
        return action

    def clip_action(self, action) -> np.ndarray:
        return np.clip(np.asarray(action, dtype=np.float64).reshape(-1), self.action_low, self.action_high)

    def mean_next_state(self, state, action) -> np.ndarray:
        return self._state(state) + self.validate_action(action) * self.dt

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-self.start_range, self.start_range, size=self.state_dim)

    def step(self, state, action, rng: np.random.Generator) -> Tuple[np.ndarray, float, bool]:
        state = self._state(state)
        mean = self.mean_next_state(state, action)
        next_state = np.clip(mean + self.noise_std * rng.standard_normal(self.state_dim),
                             -self.bound, self.bound)
        return next_state, -float(np.linalg.norm(state)), False

    def true_transition_logpdf(self, state, action, next_state) -> float:
        """
        Log-density of the unclipped Gaussian kernel

        The probability mass that clipping piles onto the boundary is ignored;
        a warning is logged when ``next_state`` sits on the boundary.
        """
        if self.noise_std == 0:
            raise EnvError("Transition density is degenerate for noise_std=0")
        next_state = self._state(next_state)
        if np.any(np.abs(next_state) >= self.bound):
            logger.warning(f"Next state {next_state.tolist()} lies on the clip boundary; "
                           f"density treated as unclipped Gaussian")
        return float(multivariate_normal.logpdf(
            next_state, mean=self.mean_next_state(state, action),
            cov=self.noise_std ** 2 * np.eye(self.state_dim)))

    def sample_action(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.action_low, self.action_high, size=self.action_dim)


class PointMassExpert(ExpertPolicy):
    """Proportional controller a = clip(-k_p * s) plus Gaussian exploration noise."""

    def __init__(self, env: PointMass, k_p: float = 1.0, noise_std: float = 0.05):
        if noise_std <= 0:
            raise EnvError(f"Expert noise_std must be positive, got {noise_std}")
        self.env = env
        self.k_p = float(k_p)
        self.noise_std = float(noise_std)

    def mean_action(self, state) -> np.ndarray:
        return self.env.clip_action(-self.k_p * self.env._state(state))

    def log_prob(self, state, action) -> float:
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        return float(multivariate_normal.logpdf(
            action, mean=self.mean_action(state),
            cov=self.noise_std ** 2 * np.eye(self.env.action_dim)))

    def sample(self, state, rng: np.random.Generator) -> np.ndarray:
        # clipped into the action box; the density ignores the clipped tail
        action = self.mean_action(state) + self.noise_std * rng.standard_normal(self.env.action_dim)
        return self.env.clip_action(action)

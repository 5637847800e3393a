"""
Slippery grid world with an exact tabular transition kernel
"""

from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union
import logging
import math

import numpy as np

from ..utils.errors import EnvError
from .base import BaseEnvironment, EnvDescriptor, ExpertPolicy

logger = logging.getLogger(__name__)

# (row, col) deltas; rows grow downwards
ACTION_DELTAS = ((-1, 0), (0, 1), (1, 0), (0, -1))
ACTION_NAMES = ('up', 'right', 'down', 'left')
N_ACTIONS = len(ACTION_DELTAS)

ChainTable = Dict[Tuple[int, int], Dict[Tuple[int, int], Fraction]]


def _fraction(value: Union[float, str, Fraction]) -> Fraction:
    return value if isinstance(value, Fraction) else Fraction(str(value))


class GridWorld(BaseEnvironment):
    """
    Grid of ``height x width`` cells with an absorbing goal.

    The intended move succeeds with probability ``1 - p_slip``; each
    perpendicular move happens with ``p_slip / 2``. Moves off the grid leave
    the agent in place. Every step outside the goal costs -1.
    """

    name = 'gridworld'

    def __init__(self, width: int = 5, height: int = 5, p_slip: float = 0.1,
                 goal: Optional[Sequence[int]] = None, horizon: int = 100):
        super().__init__()
        if width < 1 or height < 1 or width * height < 2:
            raise EnvError(f"Grid must have at least two cells, got {height}x{width}")
        self.width = int(width)
        self.height = int(height)
        self.p_slip = _fraction(p_slip)
        if not 0 <= self.p_slip <= 1:
            raise EnvError(f"p_slip must lie in [0, 1], got {p_slip}")
        self.goal = tuple(int(g) for g in goal) if goal is not None else (self.height - 1, self.width - 1)
        if not (0 <= self.goal[0] < self.height and 0 <= self.goal[1] < self.width):
            raise EnvError(f"Goal {self.goal} lies outside the grid")
        self.default_horizon = horizon
        self.goal_index = self._index(*self.goal)
        self._fractions = [[self._outcomes(s, a) for a in range(N_ACTIONS)]
                           for s in range(self.n_states)]
        self._matrix = np.zeros((self.n_states, N_ACTIONS, self.n_states))
        for s, row in enumerate(self._fractions):
            for a, outcomes in enumerate(row):
                for s_next, p in outcomes.items():
                    self._matrix[s, a, s_next] = float(p)

    @property
    def n_states(self) -> int:
        return self.width * self.height

    @property
    def n_actions(self) -> int:
        return N_ACTIONS

    @property
    def descriptor(self) -> EnvDescriptor:
        return EnvDescriptor(
            name=self.name, state_dim=2, action_type='discrete', n_actions=N_ACTIONS,
            params={'width': self.width, 'height': self.height,
                    'p_slip': float(self.p_slip), 'goal': list(self.goal),
                    'horizon': self.default_horizon})

    @property
    def non_goal_states(self) -> List[int]:
        return [s for s in range(self.n_states) if s != self.goal_index]

    def _index(self, row: int, col: int) -> int:
        return row * self.width + col

    def state_index(self, state) -> int:
        """Cell index of a (row, col) state vector."""
        state = np.asarray(state, dtype=np.float64).reshape(-1)
        if state.size != 2 or not np.all(np.isfinite(state)):
            raise EnvError(f"Grid state must be a finite (row, col) pair, got {state}")
        row, col = np.rint(state).astype(int)
        if not np.allclose(state, (row, col)) or not (0 <= row < self.height and 0 <= col < self.width):
            raise EnvError(f"State {state.tolist()} is not a grid cell")
        return self._index(int(row), int(col))

    def state_vector(self, index: int) -> np.ndarray:
        return np.array(divmod(int(index), self.width), dtype=np.float64)

    def validate_action(self, action) -> int:
        value = np.asarray(action).reshape(-1)
        if value.size != 1 or value[0] != int(value[0]) or not 0 <= int(value[0]) < N_ACTIONS:
            raise EnvError(f"Action {action!r} out of range [0, {N_ACTIONS})")
        return int(value[0])

    def _neighbor(self, index: int, action: int) -> int:
        row, col = divmod(index, self.width)
        d_row, d_col = ACTION_DELTAS[action]
        row, col = row + d_row, col + d_col
        if 0 <= row < self.height and 0 <= col < self.width:
            return self._index(row, col)
        return index

    def _outcomes(self, index: int, action: int) -> Dict[int, Fraction]:
        if index == self.goal_index:
            return {index: Fraction(1)}
        outcomes: Dict[int, Fraction] = {}
        moves = ((action, 1 - self.p_slip),
                 ((action + 1) % N_ACTIONS, self.p_slip / 2),
                 ((action + 3) % N_ACTIONS, self.p_slip / 2))
        for move, p in moves:
            if p == 0:
                continue
            target = self._neighbor(index, move)
            outcomes[target] = outcomes.get(target, Fraction(0)) + p
        return outcomes

    def transition_fractions(self) -> List[List[Dict[int, Fraction]]]:
        """Exact T[s][a] = {s': probability} in rational arithmetic."""
        return self._fractions

    def transition_matrix(self) -> np.ndarray:
        """T as a float array of shape (S, A, S)."""
        return self._matrix.copy()

    def reward(self, index: int) -> float:
        return 0.0 if index == self.goal_index else -1.0

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return self.state_vector(rng.choice(self.non_goal_states))

    def step(self, state, action, rng: np.random.Generator) -> Tuple[np.ndarray, float, bool]:
        index = self.state_index(state)
        action = self.validate_action(action)
        if index == self.goal_index:
            return self.state_vector(index), 0.0, True
        next_index = int(rng.choice(self.n_states, p=self._matrix[index, action]))
        return self.state_vector(next_index), self.reward(index), next_index == self.goal_index

    def true_transition_logpdf(self, state, action, next_state, strict: bool = False) -> float:
        """
        Exact log T(s' | s, a)

        Infeasible transitions return ``-inf``, or raise ``EnvError`` when strict.
        """
        p = self._fractions[self.state_index(state)][self.validate_action(action)].get(
            self.state_index(next_state), Fraction(0))
        if p == 0:
            if strict:
                raise EnvError(f"Transition {state} -> {next_state} under action {action} is infeasible")
            return -math.inf
        return math.log(p)

    def sample_action(self, rng: np.random.Generator) -> int:
        return int(rng.integers(N_ACTIONS))

    def value_iteration(self, tol: float = 1e-12, max_iterations: int = 100_000) -> Tuple[np.ndarray, np.ndarray]:
        """
        Optimal values of the undiscounted shortest-path problem

        Returns:
            (V, Q) with V of shape (S,) and Q of shape (S, A)
        """
        rewards = np.array([self.reward(s) for s in range(self.n_states)])
        values = np.zeros(self.n_states)
        for iteration in range(max_iterations):
            q = rewards[:, None] + self._matrix @ values
            q[self.goal_index] = 0.0
            updated = q.max(axis=1)
            if np.max(np.abs(updated - values)) < tol:
                logger.debug(f"Value iteration converged after {iteration + 1} sweeps")
                return updated, q
            values = updated
        raise EnvError(f"Value iteration did not converge in {max_iterations} sweeps")

    def policy_evaluation(self, policy: np.ndarray) -> np.ndarray:
        """Exact state values of a stochastic policy table (S, A)."""
        policy = np.asarray(policy, dtype=np.float64)
        p_pi = np.einsum('sa,sat->st', policy, self._matrix)
        rewards = np.array([self.reward(s) for s in range(self.n_states)])
        keep = self.non_goal_states
        a = np.eye(len(keep)) - p_pi[np.ix_(keep, keep)]
        values = np.zeros(self.n_states)
        values[keep] = np.linalg.solve(a, rewards[keep])
        return values

    def expected_return(self, policy: np.ndarray) -> float:
        """Expected episode return from the start distribution."""
        return float(np.mean(self.policy_evaluation(policy)[self.non_goal_states]))

    def chain_table(self, policy: np.ndarray) -> ChainTable:
        """
        State-action chain P(s', a' | s, a) induced by a policy table

        Built by enumerating the joint law of two-step fragments
        mu(s) pi(a|s) T(s'|s,a) pi(a'|s') with mu uniform over cells and
        conditioning on (s, a), in rational arithmetic.
        """
        policy = _fraction_table(policy)
        mu = Fraction(1, self.n_states)
        joint: Dict[Tuple[int, int], Dict[Tuple[int, int], Fraction]] = {}
        for s in range(self.n_states):
            for a in range(N_ACTIONS):
                head = mu * policy[s][a]
                if head == 0:
                    continue
                row = joint.setdefault((s, a), {})
                for s_next, p in self._fractions[s][a].items():
                    for a_next in range(N_ACTIONS):
                        mass = head * p * policy[s_next][a_next]
                        if mass:
                            row[(s_next, a_next)] = row.get((s_next, a_next), Fraction(0)) + mass
        return {key: {k: v / sum(row.values()) for k, v in row.items()}
                for key, row in joint.items()}


def _fraction_table(policy) -> List[List[Fraction]]:
    if isinstance(policy, GridWorldExpert):
        return policy.table
    return [[p if isinstance(p, Fraction) else Fraction(float(p)) for p in row] for row in policy]


class GridWorldExpert(ExpertPolicy):
    """
    Epsilon-greedy policy over the value-iteration optimum.

    Optimal actions share ``1 - epsilon`` equally and every action receives
    ``epsilon / 4`` on top; the goal cell acts uniformly.
    """

    def __init__(self, env: GridWorld, epsilon: float = 0.05,
                 table: Optional[List[List[Fraction]]] = None):
        self.env = env
        self.epsilon = _fraction(epsilon)
        self.table = table if table is not None else self._greedy_table()
        for s, row in enumerate(self.table):
            if sum(row) != 1:
                raise EnvError(f"Expert probabilities for state {s} do not sum to one")
        self.probabilities = np.array([[float(p) for p in row] for row in self.table])

    def _greedy_table(self) -> List[List[Fraction]]:
        _, q = self.env.value_iteration()
        table = []
        for s in range(self.env.n_states):
            if s == self.env.goal_index:
                table.append([Fraction(1, N_ACTIONS)] * N_ACTIONS)
                continue
            best = np.flatnonzero(q[s] >= q[s].max() - 1e-9)
            share = (1 - self.epsilon) / len(best)
            table.append([self.epsilon / N_ACTIONS + (share if a in best else 0)
                          for a in range(N_ACTIONS)])
        return table

    @classmethod
    def from_table(cls, env: GridWorld, table) -> 'GridWorldExpert':
        return cls(env, epsilon=0, table=_fraction_table(table))

    def greedy_actions(self, state) -> List[int]:
        row = self.probabilities[self.env.state_index(state)]
        return np.flatnonzero(row >= row.max() - 1e-12).tolist()

    def log_prob(self, state, action) -> float:
        p = self.probabilities[self.env.state_index(state), self.env.validate_action(action)]
        return math.log(p) if p > 0 else -math.inf

    def sample(self, state, rng: np.random.Generator) -> int:
        return int(rng.choice(N_ACTIONS, p=self.probabilities[self.env.state_index(state)]))

    def expected_return(self) -> float:
        return self.env.expected_return(self.probabilities)

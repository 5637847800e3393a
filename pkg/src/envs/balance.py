"""
Exact balance checks on tabular environments
"""

from fractions import Fraction
from typing import Optional
import logging

from ..utils.errors import EnvError
from .base import BaseEnvironment
from .gridworld import GridWorld, GridWorldExpert, N_ACTIONS, _fraction_table

logger = logging.getLogger(__name__)


def _require_tabular(env: BaseEnvironment) -> GridWorld:
    if not isinstance(env, GridWorld):
        raise EnvError(f"Balance checks need a discrete tabular environment; "
                       f"{env.name} has continuous states where the sum becomes an integral")
    return env


def state_balance_check(env: BaseEnvironment, expert: GridWorldExpert, policy=None) -> float:
    """
    max |P(s'|s) - sum_a pi(a|s) T(s'|s,a)| over all state pairs

    ``P`` is the state chain generated by ``expert``; ``pi`` defaults to the
    expert and may be any (S, A) policy table. The comparison runs in rational
    arithmetic, so the expert itself scores exactly 0.
    """
    env = _require_tabular(env)
    pi_d = expert.table
    pi = _fraction_table(policy) if policy is not None else pi_d
    chain = env.chain_table(expert)
    kernel = env.transition_fractions()

    worst = Fraction(0)
    for s in range(env.n_states):
        lhs = {}
        for a in range(N_ACTIONS):
            for (s_next, _), p in chain.get((s, a), {}).items():
                lhs[s_next] = lhs.get(s_next, Fraction(0)) + pi_d[s][a] * p
        rhs = {}
        for a in range(N_ACTIONS):
            for s_next, p in kernel[s][a].items():
                rhs[s_next] = rhs.get(s_next, Fraction(0)) + pi[s][a] * p
        for s_next in set(lhs) | set(rhs):
            worst = max(worst, abs(lhs.get(s_next, Fraction(0)) - rhs.get(s_next, Fraction(0))))
    logger.debug(f"State balance discrepancy on {env.height}x{env.width} grid: {float(worst)}")
    return float(worst)


def state_action_balance_check(env: BaseEnvironment, expert: GridWorldExpert,
                               policy: Optional[object] = None) -> float:
    """
    max |P(s',a'|s,a) - pi(a'|s') T(s'|s,a)| over every feasible tuple

    Feasible tuples are those with positive probability under the expert's
    chain or under the right-hand side.
    """
    env = _require_tabular(env)
    pi = _fraction_table(policy) if policy is not None else expert.table
    chain = env.chain_table(expert)
    kernel = env.transition_fractions()

    worst = Fraction(0)
    for (s, a), row in chain.items():
        rhs = {(s_next, a_next): pi[s_next][a_next] * p
               for s_next, p in kernel[s][a].items() for a_next in range(N_ACTIONS)}
        for key in set(row) | set(rhs):
            worst = max(worst, abs(row.get(key, Fraction(0)) - rhs.get(key, Fraction(0))))
    return float(worst)

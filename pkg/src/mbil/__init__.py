"""
Balance-based imitation learning from reward-free demonstrations
"""

from .densities import (
    CHAIN,
    KERNEL,
    DENSITY_KINDS,
    FlowDensity,
    FlowSettings,
    OracleDensity,
    PrecomputedDensity,
    TabularDensity,
    TransitionDensity,
    build_density
)
from .objective import (
    MbilConfig,
    ObjectiveTerms,
    balance_residual,
    dynamics_loss,
    mbil_objective,
    objective_terms
)
from .evaluation import (
    EvalResult,
    evaluate_expert,
    evaluate_policy,
    evaluate_random,
    normalized_score,
    run_episodes
)
from .trainer import (
    IterationRecord,
    PolicyTrainer,
    TrainReport,
    fit_transition_densities,
    train,
    train_bc
)

__all__ = [
    'CHAIN',
    'KERNEL',
    'DENSITY_KINDS',
    'FlowDensity',
    'FlowSettings',
    'OracleDensity',
    'PrecomputedDensity',
    'TabularDensity',
    'TransitionDensity',
    'build_density',
    'MbilConfig',
    'ObjectiveTerms',
    'balance_residual',
    'dynamics_loss',
    'mbil_objective',
    'objective_terms',
    'EvalResult',
    'evaluate_expert',
    'evaluate_policy',
    'evaluate_random',
    'normalized_score',
    'run_episodes',
    'IterationRecord',
    'PolicyTrainer',
    'TrainReport',
    'fit_transition_densities',
    'train',
    'train_bc'
]

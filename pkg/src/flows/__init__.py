"""
Conditional normalizing flows for transition density estimation
"""

from .coupling import CouplingBlock, coupling_forward, coupling_inverse, soft_clamp
from .model import (
    FlowModel,
    log_prob,
    sample,
    mean_nll,
    save_flow,
    load_flow,
    FLOW_KIND
)
from .training import DensityFitConfig, FitResult, fit_density

__all__ = [
    'CouplingBlock',
    'coupling_forward',
    'coupling_inverse',
    'soft_clamp',
    'FlowModel',
    'log_prob',
    'sample',
    'mean_nll',
    'save_flow',
    'load_flow',
    'FLOW_KIND',
    'DensityFitConfig',
    'FitResult',
    'fit_density'
]

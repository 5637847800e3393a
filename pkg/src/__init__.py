"""
Markov Balance Imitation Learning
Reverse-mode autodiff, conditional flows, policies and built-in environments
for imitation learning from reward-free demonstrations.
"""

__version__ = "1.0.0"
__description__ = "Imitation learning from the Markov balance of demonstrations"

from .mbil import MbilConfig, TrainReport, mbil_objective, train, train_bc
from .envs import GridWorld, PointMass, generate_demonstrations, make_env, make_expert
from .data import Dataset, load_dataset, save_dataset
from .utils import *

__all__ = [
    'MbilConfig',
    'TrainReport',
    'mbil_objective',
    'train',
    'train_bc',
    'GridWorld',
    'PointMass',
    'generate_demonstrations',
    'make_env',
    'make_expert',
    'Dataset',
    'load_dataset',
    'save_dataset',
    'MbilError',
    'ValidationError',
    'format_success_output',
    'format_error_output'
]

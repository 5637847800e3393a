"""
Numerical substrate: reverse-mode autodiff, layers, Adam and checkpoints
"""

from .tensor import (
    Tensor,
    Tape,
    active_tape,
    as_tensor,
    tape_forward,
    tape_backward,
    add,
    subtract,
    negate,
    multiply,
    matmul,
    exp,
    log,
    tanh,
    arctan,
    relu,
    sum_,
    concatenate,
    slice_,
    reshape,
    mean,
    square,
    log_softmax,
    softmax
)
from .layers import Module, Linear, Mlp, Activation, glorot_uniform, mlp_forward
from .optim import Adam, AdamState, adam_step
from .checkpoint import save_checkpoint, load_checkpoint, CHECKPOINT_VERSION

__all__ = [
    'Tensor',
    'Tape',
    'active_tape',
    'as_tensor',
    'tape_forward',
    'tape_backward',
    'add',
    'subtract',
    'negate',
    'multiply',
    'matmul',
    'exp',
    'log',
    'tanh',
    'arctan',
    'relu',
    'sum_',
    'concatenate',
    'slice_',
    'reshape',
    'mean',
    'square',
    'log_softmax',
    'softmax',
    'Module',
    'Linear',
    'Mlp',
    'Activation',
    'glorot_uniform',
    'mlp_forward',
    'Adam',
    'AdamState',
    'adam_step',
    'save_checkpoint',
    'load_checkpoint',
    'CHECKPOINT_VERSION'
]

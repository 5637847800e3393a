"""
Trajectory datasets, tuple buffers and batch sampling
"""

from .dataset import (
    DATASET_FORMAT,
    DATASET_VERSION,
    Dataset,
    Trajectory,
    load_dataset,
    save_dataset,
    subsample
)
from .buffer import (
    Batch,
    Buffer,
    TransitionTuple,
    batch_iter,
    build_tuples,
    decode_actions,
    encode_actions,
    encode_chain,
    encode_kernel,
    full_sweep
)

__all__ = [
    'DATASET_FORMAT',
    'DATASET_VERSION',
    'Dataset',
    'Trajectory',
    'load_dataset',
    'save_dataset',
    'subsample',
    'Batch',
    'Buffer',
    'TransitionTuple',
    'batch_iter',
    'build_tuples',
    'decode_actions',
    'encode_actions',
    'encode_chain',
    'encode_kernel',
    'full_sweep'
]

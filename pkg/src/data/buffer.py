"""
Transition tuple buffer, seeded batch sampling and tuple encodings
"""

from dataclasses import dataclass
from typing import Any, Iterator, Tuple
import logging

import numpy as np

from ..envs.base import EnvDescriptor
from ..utils.errors import DatasetError
from ..utils.validation import validate_positive_int
from .dataset import Dataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransitionTuple:
    """(s, a, s', a') taken from consecutive steps of one trajectory."""
    s: np.ndarray
    a: Any
    s_next: np.ndarray
    a_next: Any


@dataclass(frozen=True, eq=False)
class Buffer:
    """
    Tuple arrays for the dynamics term and (s, a) pairs for the policy term.

    The last pair of every trajectory has no successor action, so it shows
    up among the pairs but never as the head of a tuple.
    """
    descriptor: EnvDescriptor
    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    next_actions: np.ndarray
    bc_states: np.ndarray
    bc_actions: np.ndarray

    @property
    def n_tuples(self) -> int:
        return len(self.states)

    @property
    def n_pairs(self) -> int:
        return len(self.bc_states)

    def __len__(self) -> int:
        return self.n_tuples

    def tuple_at(self, index: int) -> TransitionTuple:
        return TransitionTuple(self.states[index], self.actions[index],
                               self.next_states[index], self.next_actions[index])

    def batch(self, tuple_indices: np.ndarray, bc_indices: np.ndarray) -> 'Batch':
        return Batch(
            states=self.states[tuple_indices],
            actions=self.actions[tuple_indices],
            next_states=self.next_states[tuple_indices],
            next_actions=self.next_actions[tuple_indices],
            bc_states=self.bc_states[bc_indices],
            bc_actions=self.bc_actions[bc_indices],
            tuple_indices=tuple_indices,
            bc_indices=bc_indices,
        )

    def chain_data(self) -> Tuple[np.ndarray, np.ndarray]:
        """(x, c) training pairs for the state-action chain density."""
        return encode_chain(self.states, self.actions, self.next_states, self.next_actions,
                            self.descriptor)

    def kernel_data(self) -> Tuple[np.ndarray, np.ndarray]:
        """(x, c) training pairs for the transition kernel density."""
        return encode_kernel(self.states, self.actions, self.next_states, self.descriptor)


@dataclass(frozen=True, eq=False)
class Batch:
    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    next_actions: np.ndarray
    bc_states: np.ndarray
    bc_actions: np.ndarray
    tuple_indices: np.ndarray
    bc_indices: np.ndarray

    @property
    def size(self) -> int:
        return max(len(self.tuple_indices), len(self.bc_indices))

    @property
    def n_tuples(self) -> int:
        return len(self.tuple_indices)


def build_tuples(dataset: Dataset) -> Buffer:
    """
    Turn trajectories into a buffer of (s, a, s', a') tuples plus all (s, a) pairs

    Raises:
        DatasetError: If the dataset holds no trajectories
    """
    if len(dataset) == 0:
        raise DatasetError("Cannot build a buffer from an empty dataset")
    heads = [(t.states[:-1], t.actions[:-1], t.states[1:], t.actions[1:]) for t in dataset]
    states, actions, next_states, next_actions = (np.concatenate(parts) for parts in zip(*heads))
    buffer = Buffer(
        descriptor=dataset.descriptor,
        states=states,
        actions=actions,
        next_states=next_states,
        next_actions=next_actions,
        bc_states=np.concatenate([t.states for t in dataset]),
        bc_actions=np.concatenate([t.actions for t in dataset]),
    )
    logger.debug(f"Built buffer with {buffer.n_tuples} tuples and {buffer.n_pairs} pairs "
                 f"from {len(dataset)} trajectories")
    return buffer


def batch_iter(buffer: Buffer, batch_size: int, seed: int, tuples: bool = True) -> Iterator[Batch]:
    """
    Endless stream of batches drawn uniformly with replacement

    Tuple indices and pair indices come from two independent generators
    spawned from ``seed``, so the pair stream is the same with or without
    tuples.

    Args:
        buffer: Source buffer
        batch_size: Rows per batch for each of the two streams
        seed: Stream seed
        tuples: Draw tuples as well as pairs
    """
    validate_positive_int('batch_size', batch_size)
    if buffer.n_pairs == 0:
        raise DatasetError("Buffer is empty")
    if tuples and buffer.n_tuples == 0:
        raise DatasetError("Buffer holds no (s, a, s', a') tuples; every trajectory has a single step")
    tuple_seq, bc_seq = np.random.SeedSequence(seed).spawn(2)
    tuple_rng, bc_rng = np.random.default_rng(tuple_seq), np.random.default_rng(bc_seq)
    empty = np.zeros(0, dtype=np.int64)
    while True:
        tuple_idx = tuple_rng.integers(buffer.n_tuples, size=batch_size) if tuples else empty
        yield buffer.batch(tuple_idx, bc_rng.integers(buffer.n_pairs, size=batch_size))


def full_sweep(buffer: Buffer, batch_size: int) -> Iterator[Batch]:
    """Every tuple exactly once, in order; the last batch may be smaller."""
    validate_positive_int('batch_size', batch_size)
    empty = np.zeros(0, dtype=np.int64)
    for start in range(0, buffer.n_tuples, batch_size):
        yield buffer.batch(np.arange(start, min(start + batch_size, buffer.n_tuples)), empty)


def encode_actions(actions: np.ndarray, descriptor: EnvDescriptor) -> np.ndarray:
    """One-hot rows for discrete actions, float rows for continuous ones."""
    actions = np.asarray(actions)
    if descriptor.is_discrete:
        return np.eye(descriptor.n_actions)[actions.reshape(-1).astype(np.int64)]
    return actions.astype(np.float64).reshape(-1, descriptor.action_dim)


def decode_actions(encoded: np.ndarray, descriptor: EnvDescriptor) -> np.ndarray:
    encoded = np.asarray(encoded, dtype=np.float64)
    if descriptor.is_discrete:
        return np.argmax(encoded, axis=-1)
    return encoded


def encode_chain(states, actions, next_states, next_actions,
                 descriptor: EnvDescriptor) -> Tuple[np.ndarray, np.ndarray]:
    """x = (s', a'), c = (s, a)."""
    x = np.hstack([np.asarray(next_states, dtype=np.float64).reshape(-1, descriptor.state_dim),
                   encode_actions(next_actions, descriptor)])
    c = np.hstack([np.asarray(states, dtype=np.float64).reshape(-1, descriptor.state_dim),
                   encode_actions(actions, descriptor)])
    return x, c


def encode_kernel(states, actions, next_states,
                  descriptor: EnvDescriptor) -> Tuple[np.ndarray, np.ndarray]:
    """x = s', c = (s, a)."""
    c = np.hstack([np.asarray(states, dtype=np.float64).reshape(-1, descriptor.state_dim),
                   encode_actions(actions, descriptor)])
    return np.asarray(next_states, dtype=np.float64).reshape(-1, descriptor.state_dim), c

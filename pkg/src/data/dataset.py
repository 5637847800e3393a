"""
Reward-free trajectory datasets and their line-delimited JSON file format

Line 1 holds the header::

    {"format": "mbil-trajectories", "version": 1, "env": {...descriptor...},
     "state_dim": 2, "action": {"type": "discrete", "n": 4}, "n_trajectories": 1}

Every following line is one step::

    {"traj_id": 0, "t": 0, "s": [0.0, 0.0], "a": 1, "done": false}

Steps of a trajectory are contiguous, ``t`` counts up from 0 and ``done`` is
true exactly on the last step. No reward field is accepted.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union
import json
import logging
import math

import numpy as np

from ..envs.base import EnvDescriptor
from ..utils.errors import DatasetError

logger = logging.getLogger(__name__)

DATASET_FORMAT = 'mbil-trajectories'
DATASET_VERSION = 1
RECORD_KEYS = frozenset({'traj_id', 't', 's', 'a', 'done'})


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    One demonstration: states (T, state_dim) and actions

    Discrete actions are stored as an int64 vector (T,), continuous actions
    as a float64 matrix (T, action_dim).
    """
    traj_id: int
    states: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.float64)
        actions = np.asarray(self.actions)
        if states.ndim != 2 or len(states) == 0:
            raise DatasetError("Trajectory needs at least one (s, a) pair", traj_id=self.traj_id)
        if len(actions) != len(states):
            raise DatasetError(f"{len(states)} states but {len(actions)} actions", traj_id=self.traj_id)
        if not np.all(np.isfinite(states)) or not np.all(np.isfinite(actions)):
            raise DatasetError("Trajectory contains non-finite values", traj_id=self.traj_id)
        object.__setattr__(self, 'states', states)
        object.__setattr__(self, 'actions', actions)

    def __len__(self) -> int:
        return len(self.states)

    def pairs(self) -> Iterator[Tuple[np.ndarray, Any]]:
        return zip(self.states, self.actions)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable collection of trajectories from one environment."""
    descriptor: EnvDescriptor
    trajectories: Tuple[Trajectory, ...]

    def __post_init__(self):
        object.__setattr__(self, 'trajectories', tuple(self.trajectories))
        for trajectory in self.trajectories:
            _check_dims(trajectory, self.descriptor)

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.trajectories)

    @property
    def n_pairs(self) -> int:
        return sum(len(t) for t in self.trajectories)

    @property
    def traj_ids(self) -> List[int]:
        return [t.traj_id for t in self.trajectories]

    def subsample(self, n_trajectories: int, seed: int) -> 'Dataset':
        return subsample(self, n_trajectories, seed)


def _check_dims(trajectory: Trajectory, descriptor: EnvDescriptor,
                line: Optional[int] = None) -> None:
    if trajectory.states.shape[1] != descriptor.state_dim:
        raise DatasetError(f"state dimension {trajectory.states.shape[1]} does not match "
                           f"descriptor state_dim {descriptor.state_dim}",
                           line=line, traj_id=trajectory.traj_id)
    actions = trajectory.actions
    if descriptor.is_discrete:
        if actions.ndim != 1 or not np.issubdtype(actions.dtype, np.integer):
            raise DatasetError("discrete actions must be integer indices",
                               line=line, traj_id=trajectory.traj_id)
        if np.any(actions < 0) or np.any(actions >= descriptor.n_actions):
            raise DatasetError(f"action index outside [0, {descriptor.n_actions})",
                               line=line, traj_id=trajectory.traj_id)
    elif actions.ndim != 2 or actions.shape[1] != descriptor.action_dim:
        raise DatasetError(f"continuous actions must have shape (T, {descriptor.action_dim}), "
                           f"got {actions.shape}", line=line, traj_id=trajectory.traj_id)


def subsample(dataset: Dataset, n_trajectories: int, seed: int) -> Dataset:
    """
    Draw trajectories uniformly without replacement

    Raises:
        DatasetError: If more trajectories are requested than the pool holds
    """
    pool = len(dataset)
    if not 1 <= n_trajectories <= pool:
        raise DatasetError(f"Cannot draw {n_trajectories} trajectories from a pool of {pool}")
    chosen = np.random.default_rng(seed).choice(pool, size=n_trajectories, replace=False)
    logger.debug(f"Subsampled trajectories {sorted(int(i) for i in chosen)} with seed {seed}")
    return Dataset(dataset.descriptor, tuple(dataset.trajectories[int(i)] for i in chosen))


def _header(dataset: Dataset) -> Dict[str, Any]:
    return {
        'format': DATASET_FORMAT,
        'version': DATASET_VERSION,
        'env': dataset.descriptor.to_dict(),
        'state_dim': dataset.descriptor.state_dim,
        'action': dataset.descriptor.action_space,
        'n_trajectories': len(dataset),
    }


def _encode_action(action: np.ndarray, discrete: bool) -> Union[int, List[float]]:
    if discrete:
        return int(action)
    return [float(v) for v in action]


def save_dataset(dataset: Dataset, path: Union[str, Path]) -> Path:
    """
    Write a dataset as line-delimited JSON

    Floats are written with ``repr`` precision, so loading is bit-exact.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    discrete = dataset.descriptor.is_discrete
    with open(path, 'w') as f:
        f.write(json.dumps(_header(dataset)) + '\n')
        for trajectory in dataset:
            last = len(trajectory) - 1
            for t, (state, action) in enumerate(trajectory.pairs()):
                record = {
                    'traj_id': int(trajectory.traj_id),
                    't': t,
                    's': [float(v) for v in state],
                    'a': _encode_action(action, discrete),
                    'done': t == last,
                }
                f.write(json.dumps(record) + '\n')
    logger.info(f"Saved {len(dataset)} trajectories ({dataset.n_pairs} pairs) to {path}")
    return path


def _parse_line(text: str, line: int) -> Dict[str, Any]:
    try:
        record = json.loads(text)
    except json.JSONDecodeError as e:
        raise DatasetError(f"Malformed JSON: {e.msg}", line=line) from e
    if not isinstance(record, dict):
        raise DatasetError("Expected a JSON object", line=line)
    return record


def _read_header(text: str, path: Path) -> EnvDescriptor:
    header = _parse_line(text, 1)
    if header.get('format') != DATASET_FORMAT:
        raise DatasetError(f"{path} is not a trajectory file (format {header.get('format')!r})", line=1)
    if header.get('version') != DATASET_VERSION:
        raise DatasetError(f"Unsupported trajectory file version {header.get('version')!r}", line=1)
    try:
        descriptor = EnvDescriptor.from_dict(header['env'])
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetError(f"Invalid environment descriptor in header: {e}", line=1) from e
    if header.get('state_dim') != descriptor.state_dim or header.get('action') != descriptor.action_space:
        raise DatasetError("Header dimensions disagree with its environment descriptor", line=1)
    return descriptor


def _check_record(record: Dict[str, Any], descriptor: EnvDescriptor, line: int) -> None:
    if 'reward' in record:
        raise DatasetError("Trajectory records must not carry rewards", line=line,
                           traj_id=record.get('traj_id'))
    keys = set(record)
    if keys != RECORD_KEYS:
        missing, extra = sorted(RECORD_KEYS - keys), sorted(keys - RECORD_KEYS)
        raise DatasetError(f"Record keys mismatch (missing {missing}, unexpected {extra})",
                           line=line, traj_id=record.get('traj_id'))
    traj_id = record['traj_id']
    if not isinstance(record['t'], int) or not isinstance(traj_id, int) or not isinstance(record['done'], bool):
        raise DatasetError("traj_id and t must be integers and done a boolean", line=line, traj_id=traj_id)
    state = record['s']
    if not isinstance(state, list) or len(state) != descriptor.state_dim:
        raise DatasetError(f"s must be a list of {descriptor.state_dim} numbers", line=line, traj_id=traj_id)
    action = record['a']
    if descriptor.is_discrete:
        if not isinstance(action, int) or isinstance(action, bool) or not 0 <= action < descriptor.n_actions:
            raise DatasetError(f"a must be an action index in [0, {descriptor.n_actions})",
                               line=line, traj_id=traj_id)
    elif not isinstance(action, list) or len(action) != descriptor.action_dim:
        raise DatasetError(f"a must be a list of {descriptor.action_dim} numbers", line=line, traj_id=traj_id)
    values = state + (action if isinstance(action, list) else [])
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in values):
        raise DatasetError("s and a must hold finite numbers", line=line, traj_id=traj_id)


def load_dataset(path: Union[str, Path], descriptor: Optional[EnvDescriptor] = None) -> Dataset:
    """
    Read and validate a trajectory file

    Args:
        path: File written by ``save_dataset``
        descriptor: Optional environment the file must match

    Raises:
        DatasetError: On any schema violation, naming the line and traj_id
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"Trajectory file not found: {path}")
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise DatasetError(f"{path} is empty", line=1)
    file_descriptor = _read_header(lines[0], path)
    if descriptor is not None and (file_descriptor.state_dim != descriptor.state_dim
                                   or file_descriptor.action_space != descriptor.action_space):
        raise DatasetError(f"{path} holds {file_descriptor.name} data with state_dim "
                           f"{file_descriptor.state_dim} and action {file_descriptor.action_space}, "
                           f"expected state_dim {descriptor.state_dim} and action {descriptor.action_space}",
                           line=1)
    n_expected = _parse_line(lines[0], 1).get('n_trajectories')

    trajectories: List[Trajectory] = []
    finished = set()
    current: Optional[int] = None
    states: List[List[float]] = []
    actions: List[Any] = []
    open_line = 1

    def close() -> None:
        if current is None:
            return
        dtype = np.int64 if file_descriptor.is_discrete else np.float64
        trajectories.append(Trajectory(current, np.array(states, dtype=np.float64),
                                       np.array(actions, dtype=dtype)))
        finished.add(current)

    for line, text in enumerate(lines[1:], start=2):
        if not text.strip():
            continue
        record = _parse_line(text, line)
        _check_record(record, file_descriptor, line)
        traj_id, t = record['traj_id'], record['t']
        if traj_id != current:
            if current is not None:
                raise DatasetError("Trajectory ended without done=true", line=open_line, traj_id=current)
            if traj_id in finished:
                raise DatasetError("Trajectory records are not contiguous", line=line, traj_id=traj_id)
            current, states, actions = traj_id, [], []
        if t != len(states):
            raise DatasetError(f"Expected t={len(states)}, found t={t}", line=line, traj_id=traj_id)
        states.append(record['s'])
        actions.append(record['a'])
        open_line = line
        if record['done']:
            close()
            current = None

    if current is not None:
        raise DatasetError("Trajectory ended without done=true", line=open_line, traj_id=current)
    if n_expected is not None and n_expected != len(trajectories):
        raise DatasetError(f"Header announces {n_expected} trajectories, file holds {len(trajectories)}", line=1)
    if not trajectories:
        raise DatasetError(f"{path} holds no trajectories")
    logger.info(f"Loaded {len(trajectories)} trajectories from {path}")
    return Dataset(file_descriptor, tuple(trajectories))

"""
Parameter checkpoint files

A checkpoint is a numpy ``.npz`` archive. Each parameter is stored under
its dotted name; the entry ``__header__`` holds a JSON document::

    {"format": "mbil-checkpoint", "version": 1, "kind": "<model kind>",
     "metadata": {...}, "shapes": {"<name>": [extents...]}}

Archives are read with ``allow_pickle=False``.
"""

import json
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union
import logging

import numpy as np

from ..utils.errors import CheckpointError

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'mbil-checkpoint'
CHECKPOINT_VERSION = 1
HEADER_KEY = '__header__'


def save_checkpoint(path: Union[str, Path], kind: str, arrays: Mapping[str, np.ndarray],
                    metadata: Optional[Mapping[str, Any]] = None) -> Path:
    """
    Write named arrays plus a versioned header

    Returns:
        Path of the written archive
    """
    path = Path(path)
    if path.suffix != '.npz':
        path = path.with_suffix('.npz')
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        'format': CHECKPOINT_FORMAT,
        'version': CHECKPOINT_VERSION,
        'kind': kind,
        'metadata': dict(metadata or {}),
        'shapes': {name: list(np.shape(a)) for name, a in arrays.items()},
    }
    payload = {name: np.asarray(a, dtype=np.float64) for name, a in arrays.items()}
    payload[HEADER_KEY] = np.array(json.dumps(header))
    with open(path, 'wb') as f:
        np.savez(f, **payload)
    logger.debug(f"Saved {kind} checkpoint with {len(arrays)} arrays to {path}")
    return path


def load_checkpoint(path: Union[str, Path],
                    kind: Optional[str] = None) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """
    Read a checkpoint written by ``save_checkpoint``

    Returns:
        (header, arrays)

    Raises:
        CheckpointError: On missing header, format/version or kind mismatch
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as archive:
        if HEADER_KEY not in archive.files:
            raise CheckpointError(f"{path} has no checkpoint header")
        header = json.loads(str(archive[HEADER_KEY]))
        arrays = {name: archive[name].copy() for name in archive.files if name != HEADER_KEY}

    if header.get('format') != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: unknown format {header.get('format')!r}")
    if header.get('version') != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {header.get('version')!r}")
    if kind is not None and header.get('kind') != kind:
        raise CheckpointError(f"{path}: expected a {kind} checkpoint, found {header.get('kind')!r}")
    for name, shape in header.get('shapes', {}).items():
        if name not in arrays or list(arrays[name].shape) != shape:
            raise CheckpointError(f"{path}: array {name} does not match its header shape {shape}")
    return header, arrays

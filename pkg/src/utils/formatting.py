"""
Output formatting utilities
"""

import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Sequence, Union
import logging

logger = logging.getLogger(__name__)

# Stable CSV schemas
REPORT_COLUMNS = ('iteration', 'dyn_loss', 'pol_loss', 'total',
                  'eval_return_mean', 'eval_return_std')
METRICS_COLUMNS = ('run_id', 'seed', 'iteration', 'dyn_loss', 'pol_loss',
                   'eval_return_mean', 'eval_return_std')
SUMMARY_COLUMNS = ('group', 'n_trajectories', 'alpha', 'beta', 'n_runs',
                   'return_mean', 'return_std', 'return_median')


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, 'item') and callable(value.item):
        return value.item()
    return value


def format_success_output(data: Dict[str, Any]) -> str:
    """
    Format successful command output

    Args:
        data: Command result

    Returns:
        JSON formatted string
    """
    output = {
        'status': 'success',
        'data': _jsonable(data)
    }
    return json.dumps(output, indent=2)


def format_error_output(message: str, context: Mapping[str, Any] = None) -> str:
    """
    Format error output

    Args:
        message: Error message
        context: Optional run context (command, run directory, seed)

    Returns:
        JSON formatted string
    """
    output = {
        'status': 'error',
        'message': message
    }
    if context:
        output['context'] = _jsonable(dict(context))
    return json.dumps(output)


def format_csv_value(value: Any) -> str:
    """Render a CSV cell; missing or non-finite numbers become empty cells."""
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else ''
    return str(value)


def write_csv(path: Union[str, Path], columns: Sequence[str],
              rows: Iterable[Mapping[str, Any]]) -> Path:
    """
    Write rows to a CSV file with a fixed column order

    Returns:
        Path of the written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_csv_value(row.get(column)) for column in columns])
            count += 1
    logger.debug(f"Wrote {count} rows to {path}")
    return path


def read_csv(path: Union[str, Path]) -> list:
    """Read a CSV written by write_csv back into a list of dictionaries."""
    with open(path, newline='') as f:
        return list(csv.DictReader(f))

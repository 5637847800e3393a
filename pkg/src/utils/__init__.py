"""
Utility modules shared by the library and the experiment front-end
"""

from .errors import (
    MbilError,
    ShapeError,
    NumericalError,
    TapeError,
    DensityTrainingError,
    TrainingDivergedError,
    DatasetError,
    EnvError,
    CheckpointError
)
from .validation import (
    validate_config,
    validate_loss_weights,
    validate_non_negative,
    validate_positive_int,
    validate_seeds,
    ValidationError
)
from .formatting import (
    format_success_output,
    format_error_output,
    write_csv,
    read_csv,
    REPORT_COLUMNS,
    METRICS_COLUMNS,
    SUMMARY_COLUMNS
)
from .runlog import configure_logging, log_run_context

__all__ = [
    'MbilError',
    'ShapeError',
    'NumericalError',
    'TapeError',
    'DensityTrainingError',
    'TrainingDivergedError',
    'DatasetError',
    'EnvError',
    'CheckpointError',
    'validate_config',
    'validate_loss_weights',
    'validate_non_negative',
    'validate_positive_int',
    'validate_seeds',
    'ValidationError',
    'format_success_output',
    'format_error_output',
    'write_csv',
    'read_csv',
    'REPORT_COLUMNS',
    'METRICS_COLUMNS',
    'SUMMARY_COLUMNS',
    'configure_logging',
    'log_run_context'
]

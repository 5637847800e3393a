"""
Exception hierarchy shared by every package in the library
"""

from typing import Any, List, Optional, Sequence


class MbilError(Exception):
    """Base exception for imitation learning library errors."""
    pass


class ShapeError(MbilError, ValueError):
    """Raised when operand shapes are incompatible for a primitive or layer."""

    def __init__(self, primitive: str, *shapes: Sequence[int], detail: str = ""):
        shape_text = " and ".join(str(tuple(s)) for s in shapes)
        message = f"{primitive}: incompatible shapes {shape_text}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)
        self.primitive = primitive
        self.shapes = [tuple(s) for s in shapes]


class NumericalError(MbilError, FloatingPointError):
    """Raised when a computation produces NaN or infinite values."""
    pass


class TapeError(MbilError, RuntimeError):
    """Raised on invalid use of a differentiation tape."""
    pass


class DensityTrainingError(NumericalError):
    """Raised when density model training diverges."""

    def __init__(self, message: str, step: int, batch_indices: Optional[List[int]] = None):
        super().__init__(f"{message} at step {step}")
        self.step = step
        self.batch_indices = list(batch_indices) if batch_indices is not None else []


class TrainingDivergedError(NumericalError):
    """Raised when policy optimisation produces a non-finite loss."""

    def __init__(self, message: str, iteration: int, report: Any = None):
        super().__init__(f"{message} at iteration {iteration}")
        self.iteration = iteration
        self.report = report


class DatasetError(MbilError, ValueError):
    """Raised when a trajectory file or dataset violates its schema."""

    def __init__(self, message: str, line: Optional[int] = None, traj_id: Optional[int] = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if traj_id is not None:
            location.append(f"traj_id {traj_id}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.line = line
        self.traj_id = traj_id


class EnvError(MbilError, ValueError):
    """Raised for invalid environment states, actions or unsupported queries."""
    pass


class CheckpointError(MbilError, ValueError):
    """Raised when a checkpoint file cannot be read back."""
    pass

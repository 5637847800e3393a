"""
Central finite-difference helpers shared by the gradient tests
"""

from typing import Callable

import numpy as np

from src.core import Module, Tape, Tensor

STEP = 1e-5


def numerical_gradient(function: Callable[[np.ndarray], float], x: np.ndarray,
                       step: float = STEP) -> np.ndarray:
    """Central differences of a scalar function, one coordinate at a time."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, out = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        upper = function(x)
        flat[i] = original - step
        lower = function(x)
        flat[i] = original
        out[i] = (upper - lower) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a|| + ||n||, 1e-8)"""
    analytic = np.ravel(analytic)
    numeric = np.ravel(numeric)
    scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-8)
    return float(np.linalg.norm(analytic - numeric) / scale)


def tensor_gradient(function: Callable[[Tensor], Tensor], x: np.ndarray) -> np.ndarray:
    """Tape gradient of ``function`` with respect to a single input array."""
    leaf = Tensor(x, requires_grad=True)
    with Tape() as tape:
        out = function(leaf)
    tape.backward(out)
    return leaf.grad


def module_gradient(module: Module, loss: Callable[[], Tensor]) -> np.ndarray:
    """Tape gradient of ``loss`` in ``parameter_vector`` layout."""
    with Tape() as tape:
        value = loss()
    tape.backward(value)
    return np.concatenate([
        (p.grad if p.grad is not None else np.zeros_like(p.values)).ravel()
        for p in module.parameters()
    ])


def module_numerical_gradient(module: Module, loss: Callable[[], Tensor],
                              step: float = STEP) -> np.ndarray:
    """Finite-difference counterpart of ``module_gradient``; restores the parameters."""
    original = module.parameter_vector()

    def evaluate(vector: np.ndarray) -> float:
        module.load_parameter_vector(vector)
        return loss().item()

    try:
        return numerical_gradient(evaluate, original, step)
    finally:
        module.load_parameter_vector(original)

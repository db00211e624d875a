"""Finite-difference helpers used by the target and integrator checks."""
from __future__ import annotations

from typing import Callable

import numpy as np


def central_difference_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray, eps: float) -> np.ndarray:
    """Central differences of a scalar function."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = eps
        grad[i] = (fn(x + step) - fn(x - step)) / (2.0 * eps)
    return grad


def central_difference_jacobian(
    fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, eps: float
) -> np.ndarray:
    """Central-difference Jacobian; column j is d fn / d x_j."""
    x = np.asarray(x, dtype=float)
    columns = []
    for j in range(x.size):
        step = np.zeros_like(x)
        step[j] = eps
        columns.append((np.asarray(fn(x + step)) - np.asarray(fn(x - step))) / (2.0 * eps))
    return np.column_stack(columns)

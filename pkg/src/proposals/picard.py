"""Plain Picard iteration y <- map(y) with residual-based stopping."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from src.common.exceptions import PicardDivergenceError


@dataclass(frozen=True)
class PicardConfig:
    tol: float = 1e-12
    max_iter: int = 100

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"picard tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"picard max_iter must be >= 1, got {self.max_iter}")


def picard_solve(
    fixed_map: Callable[[np.ndarray], np.ndarray],
    init: np.ndarray,
    cfg: PicardConfig = PicardConfig(),
) -> Tuple[np.ndarray, int]:
    """Iterate ``fixed_map`` from ``init`` until |y - map(y)| <= tol.

    Returns the iterate and the number of iterations. Raises
    PicardDivergenceError with the last residual when ``max_iter`` is hit or
    the iterates stop being finite.
    """
    y = np.asarray(init, dtype=float)
    fy = fixed_map(y)
    residual = float("inf")
    for it in range(1, cfg.max_iter + 1):
        y = fy
        fy = fixed_map(y)
        diff = y - fy
        residual = float(np.sqrt(diff @ diff))
        if not np.isfinite(residual):
            raise PicardDivergenceError(residual, it)
        if residual <= cfg.tol:
            return y, it
    raise PicardDivergenceError(residual, cfg.max_iter)

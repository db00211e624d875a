"""Lifted states x_xi = (x, xi), the involution S and the nonreversible drift.

The intensity of the nonreversible perturbation lives in J; the direction xi
only ever takes the values -1 and +1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.common.exceptions import ConfigurationError
from src.targets.potentials import Target

ROTATION = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True, eq=False)
class LiftedState:
    x: np.ndarray
    xi: int

    def __post_init__(self):
        if self.xi not in (-1, 1):
            raise ValueError(f"direction must be -1 or +1, got {self.xi!r}")


@dataclass(frozen=True, eq=False)
class SkewDrift:
    """Skew-symmetric J; gamma(x) = J grad log pi(x) = -J grad U(x)."""

    J: np.ndarray

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ConfigurationError(f"J must be a square matrix, got shape {J.shape}")
        if np.any(J + J.T != 0.0):
            raise ConfigurationError("J must be exactly skew-symmetric (J + J^T = 0)")
        object.__setattr__(self, "J", J)

    @property
    def dim(self) -> int:
        return self.J.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.J @ v

    def gamma(self, target: Target, x: np.ndarray) -> np.ndarray:
        return -(self.J @ target.gradient(x))


def flip(s: LiftedState) -> LiftedState:
    """S(x_xi) = x_{-xi}."""
    return LiftedState(s.x, -s.xi)


def make_skew_drift(matrix) -> SkewDrift:
    return SkewDrift(np.array(matrix, dtype=float))


def make_rotation_drift(alpha: float, d: int = 2) -> SkewDrift:
    """J = alpha * [[0, 1], [-1, 0]]."""
    if d != 2:
        raise ConfigurationError(f"rotation drift is only defined for d = 2, got d = {d}")
    return SkewDrift(float(alpha) * ROTATION)


def drift_at(target: Target, skew: SkewDrift, x: np.ndarray, xi: float) -> np.ndarray:
    """b^xi(x) = -(I + xi J) grad U(x); xi = 0 gives the MALA drift."""
    if skew.dim != target.dim or len(x) != target.dim:
        raise ValueError(
            f"dimension mismatch: target {target.dim}, J {skew.dim}, point {len(x)}"
        )
    g = target.gradient(x)
    if xi == 0:
        return -g
    return -(g + xi * (skew.J @ g))


def drift(target: Target, skew: SkewDrift, s: LiftedState) -> np.ndarray:
    return drift_at(target, skew, s.x, s.xi)

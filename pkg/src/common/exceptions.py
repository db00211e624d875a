"""Exception hierarchy shared by the sampler library and the benchmark CLI."""
from __future__ import annotations

from typing import List, Optional


class ConfigurationError(ValueError):
    """Invalid preset id, matrix, target capability or experiment config.

    ``errors`` holds every collected message when raised by config validation.
    """

    def __init__(self, message: str, errors: Optional[List[str]] = None):
        super().__init__(message)
        self.errors = list(errors) if errors else [message]

    def __reduce__(self):
        return (self.__class__, (str(self), self.errors))


class PicardDivergenceError(RuntimeError):
    """Fixed-point iteration did not reach its tolerance."""

    def __init__(self, residual: float, iterations: int):
        super().__init__(
            f"Picard iteration did not converge after {iterations} iterations "
            f"(residual={residual:.3e}); step size too large for this target/alpha"
        )
        self.residual = residual
        self.iterations = iterations

    def __reduce__(self):
        return (self.__class__, (self.residual, self.iterations))


class SingularProposalError(RuntimeError):
    """The Q3 preconditioning matrix M(x) is singular or not finite."""


class ChainAbortedError(RuntimeError):
    """A chain stopped because its proposal or integrator failed numerically."""

    def __init__(
        self,
        message: str,
        step: int,
        seed: int,
        h: float,
        residual: Optional[float] = None,
        sampler: Optional[str] = None,
    ):
        super().__init__(message)
        self.step = step
        self.seed = seed
        self.h = h
        self.residual = residual
        self.sampler = sampler

    def __reduce__(self):
        return (self.__class__, (str(self), self.step, self.seed, self.h, self.residual, self.sampler))

    def describe(self) -> str:
        residual = "n/a" if self.residual is None else f"{self.residual:.3e}"
        return (
            f"chain aborted: sampler={self.sampler or 'unknown'} h={self.h:g} "
            f"seed={self.seed} step={self.step} residual={residual} ({self})"
        )


class DomainError(ValueError):
    """Input outside the domain of a statistical fit."""

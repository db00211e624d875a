"""Build step functions from a picklable SamplerSpec.

Worker processes receive only the spec and rebuild targets, kernels and
integrators locally; closures never cross a process boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from src.common.exceptions import ConfigurationError
from src.integrators.hamiltonian import INTEGRATOR_NAMES, make_integrator
from src.lifting.space import LiftedState, make_rotation_drift
from src.proposals.kernels import KERNEL_NAMES, make_kernel
from src.proposals.picard import PicardConfig
from src.samplers.steps import StepRecord, ghmala_step, gmala_step, mala_lifted_step
from src.targets.potentials import Target, make_builtin_target, truncate_gradient

SAMPLER_NAMES = ("mala", "gmala", "ghmala")


@dataclass(frozen=True)
class SamplerSpec:
    sampler: str
    target: str = "std_gaussian"
    target_params: Tuple[Tuple[str, float], ...] = ()
    kernel: Optional[str] = None
    integrator: Optional[str] = None
    psi: Optional[str] = None
    alpha: float = 1.0
    truncation_radius: Optional[float] = None
    picard_tol: float = 1e-12
    picard_max_iter: int = 100

    @property
    def method(self) -> str:
        """Value of the kernel_or_integrator CSV column."""
        if self.sampler == "gmala":
            return self.kernel or ""
        if self.sampler == "ghmala":
            return self.integrator or ""
        return "none"

    @property
    def label(self) -> str:
        return self.sampler if self.sampler == "mala" else f"{self.sampler}-{self.method}"


class GradientCounter:
    """Counts calls to a gradient function."""

    def __init__(self, gradient: Callable[[np.ndarray], np.ndarray]):
        self._gradient = gradient
        self.calls = 0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        self.calls += 1
        return self._gradient(x)


@dataclass(eq=False)
class Transition:
    name: str
    advance: Callable[[LiftedState, float, np.random.Generator], StepRecord]
    counter: GradientCounter

    def __call__(self, s: LiftedState, h: float, rng: np.random.Generator) -> StepRecord:
        return self.advance(s, h, rng)


def _check_spec(spec: SamplerSpec) -> None:
    if spec.sampler not in SAMPLER_NAMES:
        raise ConfigurationError(f"Unknown sampler {spec.sampler!r} (known: {list(SAMPLER_NAMES)})")
    if spec.sampler == "gmala" and spec.kernel not in KERNEL_NAMES:
        raise ConfigurationError(f"gmala needs a kernel in {list(KERNEL_NAMES)}, got {spec.kernel!r}")
    if spec.sampler == "ghmala" and spec.integrator not in INTEGRATOR_NAMES:
        raise ConfigurationError(f"ghmala needs an integrator in {list(INTEGRATOR_NAMES)}, got {spec.integrator!r}")


def build_step_fn(spec: SamplerSpec) -> Transition:
    """Transition for ``spec`` with a fresh gradient-call counter.

    The gradient truncation, when configured, applies to the Langevin
    proposals only; the GHMALA integrator always sees the exact gradient.
    """
    _check_spec(spec)
    base = make_builtin_target(spec.target, dict(spec.target_params))
    counter = GradientCounter(base.gradient)
    exact: Target = replace(base, gradient=counter)
    proposal_target = exact
    if spec.truncation_radius is not None:
        proposal_target = truncate_gradient(exact, spec.truncation_radius)
    picard = PicardConfig(spec.picard_tol, spec.picard_max_iter)

    if spec.sampler == "mala":
        def advance(s, h, rng):
            return mala_lifted_step(proposal_target, s, h, rng)

    elif spec.sampler == "gmala":
        skew = make_rotation_drift(spec.alpha, exact.dim)
        kernel = make_kernel(spec.kernel, picard)
        if kernel.requires_hessian and exact.hessian is None:
            raise ConfigurationError(f"kernel {spec.kernel!r} needs a Hessian; target {spec.target!r} has none")

        def advance(s, h, rng):
            return gmala_step(proposal_target, skew, kernel, s, h, rng)

    else:
        skew = make_rotation_drift(spec.alpha, exact.dim)
        integrator = make_integrator(spec.integrator, exact, skew, picard, spec.psi)

        def advance(s, h, rng):
            return ghmala_step(proposal_target, integrator, s, h, rng)

    return Transition(spec.label, advance, counter)


def initial_state(
    dim: int,
    initial_x: Optional[Sequence[float]] = None,
    initial_xi: int = 1,
) -> LiftedState:
    """Lifted starting point; the origin unless ``initial_x`` is given."""
    x = np.zeros(dim) if initial_x is None else np.asarray(initial_x, dtype=float)
    if x.shape != (dim,):
        raise ConfigurationError(f"initial_x must have length {dim}, got shape {x.shape}")
    return LiftedState(x, int(initial_xi))

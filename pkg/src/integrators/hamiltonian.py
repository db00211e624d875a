"""Integrators Phi^xi_h for the Hamiltonian part dx = -xi J grad U(x) dt.

The hybrid step of GHMALA is unbiased when the integrator is xi-reversible
(Phi^xi_h = (Phi^{-xi}_h)^{-1}) and has unit Jacobian determinant;
``verify_integrator`` measures both defects plus the energy error.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from src.common.exceptions import ConfigurationError
from src.common.numerics import central_difference_jacobian
from src.lifting.space import LiftedState, SkewDrift
from src.proposals.picard import PicardConfig, picard_solve
from src.targets.potentials import Target

Advance = Callable[[LiftedState, float], Tuple[np.ndarray, int]]


@dataclass(frozen=True)
class Integrator:
    name: str
    advance: Advance
    requires_hessian: bool = False

    def step(self, s: LiftedState, h: float) -> np.ndarray:
        return self.advance(s, h)[0]


def _midpoint_solve(
    gradient: Callable[[np.ndarray], np.ndarray],
    J: np.ndarray,
    x: np.ndarray,
    xi: int,
    h: float,
    picard: PicardConfig,
) -> Tuple[np.ndarray, int]:
    if h == 0 or not np.any(J):
        return np.array(x, dtype=float), 0
    hxJ = h * xi * J

    def fixed_map(y: np.ndarray) -> np.ndarray:
        return x - hxJ @ gradient(0.5 * (x + y))

    return picard_solve(fixed_map, x - hxJ @ gradient(x), picard)


def midpoint_integrator(target: Target, skew: SkewDrift, picard: PicardConfig = PicardConfig()) -> Integrator:
    """Implicit midpoint rule y = x - h xi J grad U((x + y) / 2)."""

    def advance(s: LiftedState, h: float) -> Tuple[np.ndarray, int]:
        return _midpoint_solve(target.gradient, skew.J, s.x, s.xi, h, picard)

    return Integrator("midpoint", advance)


# ---------------------------------------------------------------------------
# Change of variables

@dataclass(frozen=True, eq=False)
class ChangeOfVariables:
    """Unit-Jacobian map psi with its inverse and derivative.

    ``quadratic_hessian`` is set when U o psi^{-1} is quadratic, in which case
    the midpoint step in the new coordinates is a single linear solve.
    """

    name: str
    psi: Callable[[np.ndarray], np.ndarray]
    psi_inv: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    quadratic_hessian: Optional[np.ndarray] = None


def _shear(x: np.ndarray, curvature: float, shift: float) -> np.ndarray:
    return np.array([x[0], x[1] + x[0] * x[0] / curvature - shift])


def _shear_inv(u: np.ndarray, curvature: float, shift: float) -> np.ndarray:
    return np.array([u[0], u[1] - u[0] * u[0] / curvature + shift])


def _shear_jacobian(x: np.ndarray, curvature: float) -> np.ndarray:
    return np.array([[1.0, 0.0], [2.0 * x[0] / curvature, 1.0]])


PSI_PRESETS = ("warped_shear",)


def make_change_of_variables(name: str, target: Target) -> ChangeOfVariables:
    """Build a psi preset matched to ``target``'s parameters.

    warped_shear: psi(x1, x2) = (x1, x2 + x1^2 / curvature - shift), which maps
    the warped Gaussian potential to u1^2 / scale + u2^2.
    """
    if name != "warped_shear":
        raise ConfigurationError(f"Unknown psi preset {name!r} (known: {list(PSI_PRESETS)})")
    if target.name != "warped_gaussian":
        raise ConfigurationError(f"psi 'warped_shear' only applies to warped_gaussian, not {target.name!r}")
    curvature = float(target.params["curvature"])
    shift = float(target.params["shift"])
    scale = float(target.params["scale"])
    return ChangeOfVariables(
        name=name,
        psi=lambda x: _shear(x, curvature, shift),
        psi_inv=lambda u: _shear_inv(u, curvature, shift),
        jacobian=lambda x: _shear_jacobian(x, curvature),
        quadratic_hessian=np.diag([2.0 / scale, 2.0]),
    )


def conjugated_midpoint_integrator(
    target: Target,
    skew: SkewDrift,
    change: ChangeOfVariables,
    picard: PicardConfig = PicardConfig(),
) -> Integrator:
    """psi^{-1} o midpoint step for U o psi^{-1} o psi.

    In 2D a unit-Jacobian psi preserves the form of dx = -xi J grad U dt, so
    the same J drives the flow in the new coordinates.
    """
    H = change.quadratic_hessian
    eye = np.eye(target.dim)

    def pushed_gradient(u: np.ndarray) -> np.ndarray:
        x = change.psi_inv(u)
        return np.linalg.solve(change.jacobian(x).T, target.gradient(x))

    def advance(s: LiftedState, h: float) -> Tuple[np.ndarray, int]:
        u = change.psi(s.x)
        if H is not None:
            A = 0.5 * h * s.xi * (skew.J @ H)
            v, iters = np.linalg.solve(eye + A, (eye - A) @ u), 0
        else:
            v, iters = _midpoint_solve(pushed_gradient, skew.J, u, s.xi, h, picard)
        return change.psi_inv(v), iters

    return Integrator("conjugated_midpoint", advance)


def explicit_splitting_integrator(target: Target, skew: SkewDrift) -> Integrator:
    """Palindromic shear splitting for separable 2D potentials.

    With J = alpha [[0, 1], [-1, 0]] the flow is dx1 = -alpha xi dV/dx2,
    dx2 = alpha xi dV/dx1; each half of the splitting moves one coordinate
    by a function of the other only.
    """
    if target.dim != 2 or skew.dim != 2:
        raise ConfigurationError("explicit_splitting needs a 2D target and J")
    if not target.separable:
        raise ConfigurationError(f"explicit_splitting needs a separable potential; {target.name!r} is not")
    alpha = float(skew.J[0, 1])
    grad = target.gradient

    def advance(s: LiftedState, h: float) -> Tuple[np.ndarray, int]:
        x1, x2 = s.x
        k = h * alpha * s.xi
        y1_half = x1 - 0.5 * k * grad(np.array([x1, x2]))[1]
        y2 = x2 + k * grad(np.array([y1_half, x2]))[0]
        y1 = y1_half - 0.5 * k * grad(np.array([y1_half, y2]))[1]
        return np.array([y1, y2]), 0

    return Integrator("explicit_splitting", advance)


INTEGRATOR_NAMES = ("midpoint", "conjugated_midpoint", "explicit_splitting")


def make_integrator(
    name: str,
    target: Target,
    skew: SkewDrift,
    picard: Optional[PicardConfig] = None,
    psi: Optional[str] = None,
) -> Integrator:
    picard = picard or PicardConfig()
    if name == "midpoint":
        return midpoint_integrator(target, skew, picard)
    if name == "conjugated_midpoint":
        if psi is None:
            raise ConfigurationError("conjugated_midpoint needs a psi preset")
        return conjugated_midpoint_integrator(target, skew, make_change_of_variables(psi, target), picard)
    if name == "explicit_splitting":
        return explicit_splitting_integrator(target, skew)
    raise ConfigurationError(f"Unknown integrator {name!r} (known: {list(INTEGRATOR_NAMES)})")


def verify_integrator(
    integ: Integrator,
    target: Target,
    x: np.ndarray,
    xi: int,
    h: float,
    eps: float = 1e-6,
) -> Tuple[float, float, float]:
    """(|Phi^{-xi}(Phi^xi(x)) - x|, |det D Phi^xi(x) - 1|, |U(Phi^xi(x)) - U(x)|)."""
    x = np.asarray(x, dtype=float)
    y = integ.step(LiftedState(x, xi), h)
    back = integ.step(LiftedState(y, -xi), h)
    reversibility = float(np.linalg.norm(back - x))
    jac = central_difference_jacobian(lambda z: integ.step(LiftedState(z, xi), h), x, eps)
    volume = abs(float(np.linalg.det(jac)) - 1.0)
    energy = abs(target.potential(y) - target.potential(x))
    return reversibility, volume, energy

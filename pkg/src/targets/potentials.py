"""Target densities pi(x) = exp(-U(x)) and observables used by the samplers.

Provides the benchmark potentials (anisotropic, warped Gaussian, quartic
Gaussian, standard Gaussian), a norm-clipping gradient truncation for
non-globally-Lipschitz targets, and finite-difference checks of the analytic
derivatives.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, Dict, Mapping, Optional

import numpy as np

from src.common.exceptions import ConfigurationError
from src.common.numerics import central_difference_gradient, central_difference_jacobian

Vector = np.ndarray


@dataclass(frozen=True, eq=False)
class Target:
    """Unnormalised target: potential U, gradient, optional Hessian.

    ``separable`` marks potentials of the form V1(x1) + V2(x2) + ..., which is
    what the explicit splitting integrator needs. ``gradient_jacobian`` is set
    when ``gradient`` is not the exact gradient of ``potential`` (see
    truncate_gradient) and gives its Jacobian.
    """

    name: str
    dim: int
    potential: Callable[[Vector], float]
    gradient: Callable[[Vector], Vector]
    hessian: Optional[Callable[[Vector], np.ndarray]] = None
    separable: bool = False
    params: Mapping[str, float] = field(default_factory=dict)
    gradient_jacobian: Optional[Callable[[Vector], np.ndarray]] = None


@dataclass(frozen=True, eq=False)
class Observable:
    name: str
    f: Callable[[Vector], float]

    def __call__(self, x: Vector) -> float:
        return self.f(x)


# ---------------------------------------------------------------------------
# Standard Gaussian: U = |x|^2 / 2

def _std_potential(x: Vector) -> float:
    return 0.5 * float(x @ x)


def _std_gradient(x: Vector) -> Vector:
    return np.array(x, dtype=float)


def _std_hessian(x: Vector) -> np.ndarray:
    return np.eye(len(x))


# ---------------------------------------------------------------------------
# Anisotropic: U = x1^2 / sqrt(1 + c x1^2) + x2^2

def _aniso_potential(x: Vector, stiffness: float) -> float:
    x1, x2 = x
    return x1 * x1 / np.sqrt(1.0 + stiffness * x1 * x1) + x2 * x2


def _aniso_gradient(x: Vector, stiffness: float) -> Vector:
    x1, x2 = x
    s = 1.0 + stiffness * x1 * x1
    # d/dx1 [x1^2 s^-1/2] = x1 (2 + c x1^2) s^-3/2
    return np.array([x1 * (2.0 + stiffness * x1 * x1) / s**1.5, 2.0 * x2])


def _aniso_hessian(x: Vector, stiffness: float) -> np.ndarray:
    x1, _ = x
    s = 1.0 + stiffness * x1 * x1
    return np.array([[(2.0 - stiffness * x1 * x1) / s**2.5, 0.0], [0.0, 2.0]])


# ---------------------------------------------------------------------------
# Warped Gaussian: U = x1^2 / scale + (x2 + x1^2 / curvature - shift)^2

def _warp(x1: float, x2: float, curvature: float, shift: float) -> float:
    return x2 + x1 * x1 / curvature - shift


def _warped_potential(x: Vector, scale: float, curvature: float, shift: float) -> float:
    x1, x2 = x
    w = _warp(x1, x2, curvature, shift)
    return x1 * x1 / scale + w * w


def _warped_gradient(x: Vector, scale: float, curvature: float, shift: float) -> Vector:
    x1, x2 = x
    w = _warp(x1, x2, curvature, shift)
    return np.array([2.0 * x1 / scale + 4.0 * w * x1 / curvature, 2.0 * w])


def _warped_hessian(x: Vector, scale: float, curvature: float, shift: float) -> np.ndarray:
    x1, x2 = x
    w = _warp(x1, x2, curvature, shift)
    h11 = 2.0 / scale + 8.0 * x1 * x1 / curvature**2 + 4.0 * w / curvature
    h12 = 4.0 * x1 / curvature
    return np.array([[h11, h12], [h12, 2.0]])


# ---------------------------------------------------------------------------
# Quartic Gaussian: U = x1^2 / scale + x2^4

def _quartic_potential(x: Vector, scale: float) -> float:
    x1, x2 = x
    return x1 * x1 / scale + x2**4


def _quartic_gradient(x: Vector, scale: float) -> Vector:
    x1, x2 = x
    return np.array([2.0 * x1 / scale, 4.0 * x2**3])


def _quartic_hessian(x: Vector, scale: float) -> np.ndarray:
    x1, x2 = x
    return np.array([[2.0 / scale, 0.0], [0.0, 12.0 * x2 * x2]])


@dataclass(frozen=True)
class PresetInfo:
    """Registry entry; capabilities are checked by config validation before any chain runs."""

    builder: Callable[[Mapping[str, float]], Target]
    defaults: Mapping[str, float]
    has_hessian: bool
    separable: bool
    dim: int


def _build_std_gaussian(params: Mapping[str, float]) -> Target:
    dim = int(params["dim"])
    return Target(
        name="std_gaussian",
        dim=dim,
        potential=_std_potential,
        gradient=_std_gradient,
        hessian=_std_hessian,
        separable=True,
        params=dict(params),
    )


def _build_anisotropic(params: Mapping[str, float]) -> Target:
    c = float(params["stiffness"])
    return Target(
        name="anisotropic",
        dim=2,
        potential=partial(_aniso_potential, stiffness=c),
        gradient=partial(_aniso_gradient, stiffness=c),
        hessian=partial(_aniso_hessian, stiffness=c),
        separable=True,
        params=dict(params),
    )


def _build_warped(params: Mapping[str, float]) -> Target:
    kw = dict(scale=float(params["scale"]), curvature=float(params["curvature"]), shift=float(params["shift"]))
    return Target(
        name="warped_gaussian",
        dim=2,
        potential=partial(_warped_potential, **kw),
        gradient=partial(_warped_gradient, **kw),
        hessian=partial(_warped_hessian, **kw),
        separable=False,
        params=dict(params),
    )


def _build_quartic(params: Mapping[str, float]) -> Target:
    scale = float(params["scale"])
    return Target(
        name="quartic_gaussian",
        dim=2,
        potential=partial(_quartic_potential, scale=scale),
        gradient=partial(_quartic_gradient, scale=scale),
        hessian=partial(_quartic_hessian, scale=scale),
        separable=True,
        params=dict(params),
    )


TARGET_PRESETS: Dict[str, PresetInfo] = {
    "std_gaussian": PresetInfo(_build_std_gaussian, {"dim": 2}, True, True, 2),
    "anisotropic": PresetInfo(_build_anisotropic, {"stiffness": 50.0}, True, True, 2),
    "warped_gaussian": PresetInfo(
        _build_warped, {"scale": 100.0, "curvature": 20.0, "shift": 5.0}, True, False, 2
    ),
    "quartic_gaussian": PresetInfo(_build_quartic, {"scale": 100.0}, True, True, 2),
}


def make_builtin_target(name: str, params: Optional[Mapping[str, float]] = None) -> Target:
    """Build a named benchmark target; ``params`` override the preset defaults."""
    info = TARGET_PRESETS.get(name)
    if info is None:
        raise ConfigurationError(f"Unknown target preset: {name!r} (known: {sorted(TARGET_PRESETS)})")
    merged = dict(info.defaults)
    for key, value in (params or {}).items():
        if key not in merged:
            raise ConfigurationError(f"Unknown parameter {key!r} for target {name!r}")
        merged[key] = value
    return info.builder(merged)


def _clipped_gradient(gradient: Callable[[Vector], Vector], radius: float, x: Vector) -> Vector:
    g = gradient(x)
    norm = float(np.sqrt(g @ g))
    if norm > radius:
        return g * (radius / norm)
    return g


def _clipped_jacobian(
    gradient: Callable[[Vector], Vector],
    jacobian: Callable[[Vector], np.ndarray],
    radius: float,
    x: Vector,
) -> np.ndarray:
    # D(R g / |g|) = (R / |g|) (I - u u^T) Dg with u = g / |g|
    D = np.asarray(jacobian(x), dtype=float)
    g = gradient(x)
    norm = float(np.sqrt(g @ g))
    if norm > radius:
        u = g / norm
        return (radius / norm) * (D - np.outer(u, u @ D))
    return D


def truncate_gradient(target: Target, radius: float) -> Target:
    """Return a copy whose gradient is clipped to norm ``radius``.

    Potential and Hessian are unchanged, so Metropolis corrections still target
    exp(-U); only the proposal drift is bounded. The Jacobian of the clipped
    field goes to ``gradient_jacobian`` when the target has a closed-form one.
    """
    if not radius > 0:
        raise ConfigurationError(f"Truncation radius must be positive, got {radius}")
    params = dict(target.params)
    params["truncation_radius"] = float(radius)
    jacobian = None
    if target.hessian is not None or target.gradient_jacobian is not None:
        jacobian = partial(_clipped_jacobian, target.gradient, partial(gradient_jacobian, target), float(radius))
    return replace(
        target,
        gradient=partial(_clipped_gradient, target.gradient, float(radius)),
        params=params,
        gradient_jacobian=jacobian,
    )


def gradient_jacobian(target: Target, x: Vector) -> Optional[np.ndarray]:
    """Closed-form Jacobian of ``target.gradient`` at ``x``; None when the target has none."""
    if target.gradient_jacobian is not None:
        return target.gradient_jacobian(x)
    if target.hessian is not None:
        return target.hessian(x)
    return None


def check_gradient(target: Target, x: Vector, eps: float = 1e-5) -> float:
    """Worst componentwise relative error of the analytic gradient.

    Relative to max(1, |analytic component|) so points where the gradient
    vanishes are compared absolutely.
    """
    x = np.asarray(x, dtype=float)
    analytic = np.asarray(target.gradient(x), dtype=float)
    numeric = central_difference_gradient(target.potential, x, eps)
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))))


def check_hessian(target: Target, x: Vector, eps: float = 1e-5) -> float:
    """Worst relative error of the analytic Hessian against differences of the gradient."""
    if target.hessian is None:
        raise ConfigurationError(f"Target {target.name!r} has no Hessian")
    x = np.asarray(x, dtype=float)
    analytic = np.asarray(target.hessian(x), dtype=float)
    numeric = central_difference_jacobian(target.gradient, x, eps)
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))))


def _tail_quadratic(x: Vector, threshold: float) -> float:
    return float(x[0] * x[0]) if x[0] > threshold else 0.0


def _radius_squared(x: Vector) -> float:
    return float(x @ x)


OBSERVABLE_PRESETS: Dict[str, Callable[[], Observable]] = {
    "indicator_tail_quadratic": lambda: Observable(
        "indicator_tail_quadratic", partial(_tail_quadratic, threshold=15.0)
    ),
    "radius_squared": lambda: Observable("radius_squared", _radius_squared),
}


def make_observable(name: str) -> Observable:
    factory = OBSERVABLE_PRESETS.get(name)
    if factory is None:
        raise ConfigurationError(f"Unknown observable preset: {name!r} (known: {sorted(OBSERVABLE_PRESETS)})")
    return factory()

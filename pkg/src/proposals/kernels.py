"""GMALA proposal kernels.

All three kernels discretise dx = -(I + xi J) grad U(x) dt + sqrt(2) dW over a
step h:

* Q1: explicit Euler-Maruyama.
* Q2: the nonreversible part taken at the midpoint (x + y) / 2, solved by
  Picard iteration. For gradient-type drifts the Jacobian factors of the
  forward and reverse densities cancel, so the Metropolis-Hastings ratio only
  needs the two noise residuals.
* Q3: Q2 linearised around x; needs the Hessian but no fixed point.

Each ``*_log_mh_ratio`` returns
log[pi(y) Q^{-xi}(y, x) / (pi(x) Q^{xi}(x, y))].
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from src.common.exceptions import ConfigurationError, SingularProposalError
from src.common.numerics import central_difference_jacobian
from src.lifting.space import LiftedState, SkewDrift, drift_at
from src.proposals.picard import PicardConfig, picard_solve
from src.targets.potentials import Target, gradient_jacobian


@dataclass(frozen=True, eq=False)
class ProposalOutcome:
    y: np.ndarray
    chi: np.ndarray
    picard_iters: int = 0


def _draw_chi(rng: Optional[np.random.Generator], dim: int, chi: Optional[np.ndarray]) -> np.ndarray:
    if chi is not None:
        return np.asarray(chi, dtype=float)
    if rng is None:
        raise ValueError("either rng or chi must be given")
    return rng.standard_normal(dim)


def _gaussian_log_norm(dim: int, h: float) -> float:
    return -0.5 * dim * np.log(4.0 * np.pi * h)


# ---------------------------------------------------------------------------
# Q1

def q1_sample(
    target: Target,
    skew: SkewDrift,
    s: LiftedState,
    h: float,
    rng: Optional[np.random.Generator] = None,
    chi: Optional[np.ndarray] = None,
) -> ProposalOutcome:
    noise = _draw_chi(rng, target.dim, chi)
    y = s.x + h * drift_at(target, skew, s.x, s.xi) + np.sqrt(2.0 * h) * noise
    return ProposalOutcome(y, noise, 0)


def q1_log_density(target: Target, skew: SkewDrift, xi: float, x: np.ndarray, y: np.ndarray, h: float) -> float:
    """log N(y; x + h b^xi(x), 2h I)."""
    r = y - x - h * drift_at(target, skew, x, xi)
    return _gaussian_log_norm(target.dim, h) - float(r @ r) / (4.0 * h)


def q1_log_mh_ratio(target: Target, skew: SkewDrift, s: LiftedState, y: np.ndarray, h: float) -> float:
    # normalising constants cancel; written as MALA's ratio when J = 0
    x, xi = s.x, s.xi
    r_f = y - x - h * drift_at(target, skew, x, xi)
    r_r = x - y - h * drift_at(target, skew, y, -xi)
    return target.potential(x) - target.potential(y) - (float(r_r @ r_r) - float(r_f @ r_f)) / (4.0 * h)


# ---------------------------------------------------------------------------
# Q2

def phi(target: Target, skew: SkewDrift, x: np.ndarray, y: np.ndarray, h: float, xi: float) -> np.ndarray:
    """Phi_x^{h xi}(y) = y + h xi J grad U((x + y) / 2)."""
    return y + h * xi * (skew.J @ target.gradient(0.5 * (x + y)))


def q2_sample(
    target: Target,
    skew: SkewDrift,
    s: LiftedState,
    h: float,
    rng: Optional[np.random.Generator] = None,
    cfg: PicardConfig = PicardConfig(),
    chi: Optional[np.ndarray] = None,
) -> ProposalOutcome:
    """Solve Phi_x^{h xi}(y) = x - h grad U(x) + sqrt(2h) chi, starting from the Q1 point."""
    x, xi = s.x, s.xi
    noise = _draw_chi(rng, target.dim, chi)
    g = target.gradient(x)
    rhs = x - h * g + np.sqrt(2.0 * h) * noise
    if not np.any(skew.J):
        return ProposalOutcome(rhs, noise, 0)
    hxJ = h * xi * skew.J

    def fixed_map(y: np.ndarray) -> np.ndarray:
        return rhs - hxJ @ target.gradient(0.5 * (x + y))

    y, iters = picard_solve(fixed_map, rhs - hxJ @ g, cfg)
    return ProposalOutcome(y, noise, iters)


def _q2_log_jacobian_ratio(
    target: Target,
    skew: SkewDrift,
    mid: np.ndarray,
    xi: float,
    h: float,
    eps: float = 1e-6,
) -> float:
    """log|det D Phi_y^{-h xi}(x)| - log|det D Phi_x^{h xi}(y)|; zero when the drift field is a gradient."""
    dg = gradient_jacobian(target, mid)
    if dg is None:
        dg = central_difference_jacobian(target.gradient, mid, eps)
    half = 0.5 * h * xi * (skew.J @ dg)
    eye = np.eye(target.dim)
    _, reverse = np.linalg.slogdet(eye - half)
    _, forward = np.linalg.slogdet(eye + half)
    return float(reverse - forward)


def q2_log_mh_ratio(target: Target, skew: SkewDrift, s: LiftedState, y: np.ndarray, h: float) -> float:
    """Residual form: U(x) - U(y) + (|chi_f|^2 - |chi_r|^2) / 2.

    Phi_x^{h xi}(y) and Phi_y^{-h xi}(x) share the midpoint, so the
    nonreversible term is evaluated once. A truncated gradient is not a
    gradient field where the clip is active, so the Jacobian factors are kept
    for truncated targets.
    """
    x, xi = s.x, s.xi
    mid = 0.5 * (x + y)
    shift = h * xi * (skew.J @ target.gradient(mid))
    scale = np.sqrt(2.0 * h)
    chi_f = (y + shift - x + h * target.gradient(x)) / scale
    chi_r = (x - shift - y + h * target.gradient(y)) / scale
    log_r = target.potential(x) - target.potential(y) + 0.5 * (float(chi_f @ chi_f) - float(chi_r @ chi_r))
    if "truncation_radius" in target.params and np.any(skew.J):
        log_r += _q2_log_jacobian_ratio(target, skew, mid, xi, h)
    return log_r


def q2_log_density(
    target: Target,
    skew: SkewDrift,
    xi: float,
    x: np.ndarray,
    y: np.ndarray,
    h: float,
    eps: float = 1e-6,
) -> float:
    """Full Q2 log-density including log|det D Phi_x^{h xi}(y)|.

    Uses the analytic Jacobian I + (h xi / 2) J Dg(midpoint) when the target
    has a closed-form gradient Jacobian, central differences otherwise.
    """
    dg = gradient_jacobian(target, 0.5 * (x + y))
    if dg is not None:
        jac = np.eye(target.dim) + 0.5 * h * xi * (skew.J @ dg)
    else:
        jac = central_difference_jacobian(lambda z: phi(target, skew, x, z, h, xi), y, eps)
    _, logdet = np.linalg.slogdet(jac)
    r = phi(target, skew, x, y, h, xi) - x + h * target.gradient(x)
    return _gaussian_log_norm(target.dim, h) + logdet - float(r @ r) / (4.0 * h)


# ---------------------------------------------------------------------------
# Q3

def q3_matrix(target: Target, skew: SkewDrift, x: np.ndarray, xi: float, h: float) -> Tuple[np.ndarray, float]:
    """M^xi(x) = I + (h xi / 2) J Hess U(x) and log|det M|."""
    if target.hessian is None:
        raise ConfigurationError(f"kernel q3 needs a Hessian; target {target.name!r} has none")
    M = np.eye(target.dim) + 0.5 * h * xi * (skew.J @ target.hessian(x))
    sign, logdet = np.linalg.slogdet(M)
    if sign == 0 or not np.isfinite(logdet):
        raise SingularProposalError(f"M(x) is singular at x={x} (h={h}, xi={xi}); reduce h")
    return M, float(logdet)


def q3_sample(
    target: Target,
    skew: SkewDrift,
    s: LiftedState,
    h: float,
    rng: Optional[np.random.Generator] = None,
    chi: Optional[np.ndarray] = None,
) -> ProposalOutcome:
    x, xi = s.x, s.xi
    noise = _draw_chi(rng, target.dim, chi)
    M, _ = q3_matrix(target, skew, x, xi, h)
    rhs = h * drift_at(target, skew, x, xi) + np.sqrt(2.0 * h) * noise
    return ProposalOutcome(x + np.linalg.solve(M, rhs), noise, 0)


def q3_log_density(target: Target, skew: SkewDrift, xi: float, x: np.ndarray, y: np.ndarray, h: float) -> float:
    M, logdet = q3_matrix(target, skew, x, xi, h)
    r = M @ (y - x) - h * drift_at(target, skew, x, xi)
    return _gaussian_log_norm(target.dim, h) + logdet - float(r @ r) / (4.0 * h)


def q3_log_mh_ratio(target: Target, skew: SkewDrift, s: LiftedState, y: np.ndarray, h: float) -> float:
    x, xi = s.x, s.xi
    return (
        target.potential(x)
        - target.potential(y)
        + q3_log_density(target, skew, -xi, y, x, h)
        - q3_log_density(target, skew, xi, x, y, h)
    )


# ---------------------------------------------------------------------------
# Kernel objects used by the GMALA step

@dataclass(frozen=True)
class Q1Kernel:
    name: str = "q1"
    requires_hessian: bool = False

    def sample(self, target, skew, s, h, rng, chi=None) -> ProposalOutcome:
        return q1_sample(target, skew, s, h, rng, chi=chi)

    def log_mh_ratio(self, target, skew, s, y, h) -> float:
        return q1_log_mh_ratio(target, skew, s, y, h)


@dataclass(frozen=True)
class Q2Kernel:
    picard: PicardConfig = PicardConfig()
    name: str = "q2"
    requires_hessian: bool = False

    def sample(self, target, skew, s, h, rng, chi=None) -> ProposalOutcome:
        return q2_sample(target, skew, s, h, rng, cfg=self.picard, chi=chi)

    def log_mh_ratio(self, target, skew, s, y, h) -> float:
        return q2_log_mh_ratio(target, skew, s, y, h)


@dataclass(frozen=True)
class Q3Kernel:
    name: str = "q3"
    requires_hessian: bool = True

    def sample(self, target, skew, s, h, rng, chi=None) -> ProposalOutcome:
        return q3_sample(target, skew, s, h, rng, chi=chi)

    def log_mh_ratio(self, target, skew, s, y, h) -> float:
        return q3_log_mh_ratio(target, skew, s, y, h)


KERNEL_NAMES = ("q1", "q2", "q3")


def make_kernel(name: str, picard: Optional[PicardConfig] = None):
    kernels: Dict[str, object] = {
        "q1": Q1Kernel(),
        "q2": Q2Kernel(picard or PicardConfig()),
        "q3": Q3Kernel(),
    }
    if name not in kernels:
        raise ConfigurationError(f"Unknown kernel {name!r} (known: {list(KERNEL_NAMES)})")
    return kernels[name]

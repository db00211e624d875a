"""Single transitions of MALA, GMALA and GHMALA.

Random-number consumption per step: the proposal noise chi, then one uniform
only when the acceptance probability is below one. GHMALA draws its hybrid
uniform under the same rule, so with J = 0 all three samplers walk the same
stream.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.integrators.hamiltonian import Integrator
from src.lifting.space import LiftedState, SkewDrift, flip
from src.targets.potentials import Target


@dataclass(frozen=True, eq=False)
class StepRecord:
    """Outcome of one transition.

    For GHMALA ``accepted`` and ``accept_prob`` describe the MALA substep and
    the ``hybrid_*`` fields the Hamiltonian substep.
    """

    state: LiftedState
    accepted: bool
    log_ratio: float
    picard_iters: int = 0
    accept_prob: float = 1.0
    hybrid_accepted: Optional[bool] = None
    hybrid_accept_prob: Optional[float] = None


def _metropolis_accept(log_r: float, rng: np.random.Generator) -> Tuple[bool, float]:
    """Accept with probability min(1, exp(log_r)); NaN counts as a rejection."""
    if np.isnan(log_r):
        return False, 0.0
    if log_r >= 0.0:
        return True, 1.0
    prob = float(np.exp(log_r))
    return bool(rng.random() < prob), prob


def _mala_move(
    target: Target,
    x: np.ndarray,
    h: float,
    rng: np.random.Generator,
    chi: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, bool, float, float]:
    if chi is None:
        chi = rng.standard_normal(target.dim)
    g_x = target.gradient(x)
    y = x - h * g_x + np.sqrt(2.0 * h) * chi
    if not np.all(np.isfinite(y)):
        return x, False, float("nan"), 0.0
    r_f = y - x + h * g_x
    r_r = x - y + h * target.gradient(y)
    log_r = target.potential(x) - target.potential(y) - (float(r_r @ r_r) - float(r_f @ r_f)) / (4.0 * h)
    accepted, prob = _metropolis_accept(log_r, rng)
    return (y if accepted else x), accepted, log_r, prob


def mala_step(
    target: Target,
    x: np.ndarray,
    h: float,
    rng: np.random.Generator,
    chi: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, bool]:
    """One MALA step from ``x``; returns the new point and whether it moved."""
    point, accepted, _, _ = _mala_move(target, np.asarray(x, dtype=float), h, rng, chi)
    return point, accepted


def mala_lifted_step(target: Target, s: LiftedState, h: float, rng: np.random.Generator) -> StepRecord:
    """MALA on the lifted space; the direction is carried along untouched."""
    point, accepted, log_r, prob = _mala_move(target, s.x, h, rng)
    return StepRecord(LiftedState(point, s.xi), accepted, log_r, 0, prob)


def gmala_step(
    target: Target,
    skew: SkewDrift,
    kernel,
    s: LiftedState,
    h: float,
    rng: np.random.Generator,
) -> StepRecord:
    """Propose y ~ Q^xi(x, .); on accept move to (y, xi), on reject flip to (x, -xi)."""
    proposal = kernel.sample(target, skew, s, h, rng)
    if np.all(np.isfinite(proposal.y)):
        log_r = kernel.log_mh_ratio(target, skew, s, proposal.y, h)
    else:
        log_r = float("nan")
    accepted, prob = _metropolis_accept(log_r, rng)
    state = LiftedState(proposal.y, s.xi) if accepted else flip(s)
    return StepRecord(state, accepted, log_r, proposal.picard_iters, prob)


def ghmala_step(
    target: Target,
    integrator: Integrator,
    s: LiftedState,
    h: float,
    rng: np.random.Generator,
) -> StepRecord:
    """MALA substep, then x~ = Phi^xi_h(x_half) accepted with min(1, exp(U(x_half) - U(x~))).

    A hybrid rejection keeps x_half and flips the direction.
    """
    x_half, accepted, log_r, prob = _mala_move(target, s.x, h, rng)
    x_tilde, iters = integrator.advance(LiftedState(x_half, s.xi), h)
    if np.all(np.isfinite(x_tilde)):
        log_beta = target.potential(x_half) - target.potential(x_tilde)
    else:
        log_beta = float("nan")
    hybrid_accepted, beta = _metropolis_accept(log_beta, rng)
    if hybrid_accepted:
        state = LiftedState(x_tilde, s.xi)
    else:
        state = LiftedState(x_half, -s.xi)
    return StepRecord(state, accepted, log_r, iters, prob, hybrid_accepted, beta)

"""Chain driver: runs a transition for N steps and forms the time average.

The estimator is pi_hat(f) = (1 / (N - B)) * sum_{n > B} f(x_n) over the
states after burn-in B.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from src.common.exceptions import ChainAbortedError, PicardDivergenceError, SingularProposalError
from src.common.logging_config import get_logger
from src.lifting.space import LiftedState
from src.samplers.steps import StepRecord
from src.targets.potentials import Observable

logger = get_logger(__name__)

StepFn = Callable[[LiftedState, float, np.random.Generator], StepRecord]


def replicate_seed(master_seed: int, replicate: int) -> int:
    """64-bit seed of replicate ``replicate``, split off ``master_seed``."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(replicate),))
    return int(seq.generate_state(1, np.uint64)[0])


@dataclass(frozen=True, eq=False)
class ChainConfig:
    h: float
    n_steps: int
    burn_in: int
    seed: int
    initial_state: LiftedState

    def __post_init__(self):
        if not (np.isfinite(self.h) and self.h > 0):
            raise ValueError(f"h must be positive, got {self.h}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if not 0 <= self.burn_in < self.n_steps:
            raise ValueError(f"burn_in must satisfy 0 <= burn_in < n_steps, got {self.burn_in}")


@dataclass(frozen=True, eq=False)
class ChainResult:
    """Summary of one chain; per-step arrays cover the post-burn-in steps only.

    ``n_rejections``, ``n_hybrid_rejections`` and ``n_flips`` count over the
    whole chain, burn-in included.
    """

    time_average: float
    n_retained: int
    f_values: np.ndarray
    accepted: np.ndarray
    accept_probs: np.ndarray
    hybrid_accepted: Optional[np.ndarray]
    hybrid_accept_probs: Optional[np.ndarray]
    n_rejections: int
    n_hybrid_rejections: int
    n_flips: int
    picard_iters: int
    gradient_calls: Optional[int]
    final_state: LiftedState
    trace: Optional[np.ndarray] = None

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.accepted))

    def rejection_probabilities(self) -> np.ndarray:
        return 1.0 - self.accept_probs

    def hybrid_rejection_probabilities(self) -> Optional[np.ndarray]:
        if self.hybrid_accept_probs is None:
            return None
        return 1.0 - self.hybrid_accept_probs


def _gradient_calls(step_fn) -> Optional[int]:
    counter = getattr(step_fn, "counter", None)
    return None if counter is None else counter.calls


def run_chain(
    step_fn: StepFn,
    cfg: ChainConfig,
    observable: Observable,
    keep_trace: bool = False,
    thin: int = 1,
) -> ChainResult:
    """Run ``cfg.n_steps`` transitions from ``cfg.initial_state`` with rng seeded by ``cfg.seed``.

    Proposal and integrator failures are re-raised as ChainAbortedError
    carrying the step index, seed and h.
    """
    if thin < 1:
        raise ValueError(f"thin must be >= 1, got {thin}")
    rng = np.random.default_rng(cfg.seed)
    n_keep = cfg.n_steps - cfg.burn_in
    f_values = np.empty(n_keep)
    accepted = np.empty(n_keep, dtype=bool)
    accept_probs = np.empty(n_keep)
    hybrid_accepted = None
    hybrid_probs = None
    trace = [] if keep_trace else None

    state = cfg.initial_state
    n_rejections = n_hybrid_rejections = n_flips = picard_iters = 0
    calls_before = _gradient_calls(step_fn)

    for n in range(1, cfg.n_steps + 1):
        try:
            rec = step_fn(state, cfg.h, rng)
        except (PicardDivergenceError, SingularProposalError) as exc:
            err = ChainAbortedError(
                str(exc),
                step=n,
                seed=cfg.seed,
                h=cfg.h,
                residual=getattr(exc, "residual", None),
                sampler=getattr(step_fn, "name", None),
            )
            logger.warning(err.describe())
            raise err from exc

        if rec.state.xi != state.xi:
            n_flips += 1
        if not rec.accepted:
            n_rejections += 1
        if rec.hybrid_accepted is not None and not rec.hybrid_accepted:
            n_hybrid_rejections += 1
        picard_iters += rec.picard_iters
        state = rec.state

        i = n - cfg.burn_in - 1
        if i < 0:
            continue
        f_values[i] = observable(state.x)
        accepted[i] = rec.accepted
        accept_probs[i] = rec.accept_prob
        if rec.hybrid_accepted is not None:
            if hybrid_accepted is None:
                hybrid_accepted = np.empty(n_keep, dtype=bool)
                hybrid_probs = np.empty(n_keep)
            hybrid_accepted[i] = rec.hybrid_accepted
            hybrid_probs[i] = rec.hybrid_accept_prob
        if trace is not None and i % thin == 0:
            trace.append(np.array(state.x, copy=True))

    calls_after = _gradient_calls(step_fn)
    return ChainResult(
        time_average=float(np.mean(f_values)),
        n_retained=n_keep,
        f_values=f_values,
        accepted=accepted,
        accept_probs=accept_probs,
        hybrid_accepted=hybrid_accepted,
        hybrid_accept_probs=hybrid_probs,
        n_rejections=n_rejections,
        n_hybrid_rejections=n_hybrid_rejections,
        n_flips=n_flips,
        picard_iters=picard_iters,
        gradient_calls=None if calls_before is None else calls_after - calls_before,
        final_state=state,
        trace=None if trace is None else np.array(trace),
    )

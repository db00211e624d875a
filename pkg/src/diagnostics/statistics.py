"""Estimators feeding the experiment CSV.

* rejection rates: mean per-step rejection probability 1 - min(1, r) with an
  autocorrelation-adjusted standard error;
* asymptotic variance: empirical variance of independent time averages with a
  chi-square confidence interval;
* integrated autocorrelation time: Geyer initial positive sequence;
* log-log slope fits for the rejection-order checks.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import chi2, linregress
from statsmodels.tsa.stattools import acovf

from src.common.exceptions import DomainError
from src.samplers.chain import ChainConfig, ChainResult, StepFn, replicate_seed, run_chain
from src.samplers.factory import SamplerSpec, build_step_fn, initial_state
from src.targets.potentials import Observable

# ---------------------------------------------------------------------------
# Autocorrelation


def integrated_autocorrelation_time(values: Sequence[float]) -> float:
    """tau = 1 + 2 sum_k rho_k, truncated at the first non-positive pair sum.

    A constant sequence has no autocorrelation to measure and returns 1.
    """
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        return 1.0
    gamma = acovf(x, adjusted=False, demean=True, fft=True)
    if not gamma[0] > 0:
        return 1.0
    rho = gamma / gamma[0]
    n_pairs = rho.size // 2
    pairs = rho[: 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    tau = -1.0
    for pair in pairs:
        if pair <= 0:
            break
        tau += 2.0 * pair
    return float(max(tau, 1e-12))


def rate_with_stderr(series: Sequence[float]) -> Tuple[float, float]:
    """Mean of a [0, 1]-valued series and its binomial standard error times sqrt(IAT)."""
    p = np.asarray(series, dtype=float)
    if p.size == 0:
        return float("nan"), float("nan")
    rate = float(np.mean(p))
    spread = max(rate * (1.0 - rate), 0.0)
    if spread == 0.0:
        return rate, 0.0
    iat = integrated_autocorrelation_time(p)
    return rate, float(np.sqrt(spread / p.size * iat))


# ---------------------------------------------------------------------------
# Rejection rates


@dataclass(frozen=True)
class RejectionStats:
    """Rejection rates of one chain; the hybrid fields are set for GHMALA only."""

    rate: float
    stderr: float
    n_retained: int
    n_rejections: int
    hybrid_rate: Optional[float] = None
    hybrid_stderr: Optional[float] = None
    n_hybrid_rejections: Optional[int] = None


def rejection_stats(result: ChainResult) -> RejectionStats:
    rate, se = rate_with_stderr(result.rejection_probabilities())
    hybrid = result.hybrid_rejection_probabilities()
    if hybrid is None:
        return RejectionStats(rate, se, result.n_retained, result.n_rejections)
    h_rate, h_se = rate_with_stderr(hybrid)
    return RejectionStats(
        rate, se, result.n_retained, result.n_rejections, h_rate, h_se, result.n_hybrid_rejections
    )


def _resolve_step_fn(spec: Union[SamplerSpec, StepFn]) -> StepFn:
    return build_step_fn(spec) if isinstance(spec, SamplerSpec) else spec


def _constant(_: np.ndarray) -> float:
    return 0.0


def rejection_rate(
    spec: Union[SamplerSpec, StepFn],
    h: float,
    n_steps: int,
    seed: int,
    burn_in_fraction: float = 0.1,
    initial=None,
    dim: int = 2,
) -> RejectionStats:
    """Run one chain and report its rejection rate(s) after burn-in.

    ``spec`` is a SamplerSpec or an already-built step function; ``initial``
    defaults to the origin in ``dim`` dimensions with direction +1.
    """
    step_fn = _resolve_step_fn(spec)
    cfg = ChainConfig(
        h=h,
        n_steps=n_steps,
        burn_in=int(np.floor(burn_in_fraction * n_steps)),
        seed=seed,
        initial_state=initial if initial is not None else initial_state(dim),
    )
    return rejection_stats(run_chain(step_fn, cfg, Observable("zero", _constant)))


# ---------------------------------------------------------------------------
# Replicate variance


@dataclass(frozen=True, eq=False)
class ReplicateStats:
    n_replicates: int
    n_samples: int
    estimates: np.ndarray
    mean: float
    variance: float
    variance_ci: Tuple[float, float]

    @property
    def ci_halfwidth(self) -> float:
        lo, hi = self.variance_ci
        return 0.5 * (hi - lo)


def replicate_stats_from_estimates(estimates: Sequence[float], n_samples: int, level: float = 0.95) -> ReplicateStats:
    """Sample variance of independent estimates with a chi-square interval.

    ``estimates`` must be ordered by replicate index for the result to be
    reproducible bit for bit.
    """
    est = np.asarray(estimates, dtype=float)
    n = est.size
    if n < 2:
        raise DomainError(f"need at least 2 replicates for a variance, got {n}")
    var = float(np.var(est, ddof=1))
    tail = 0.5 * (1.0 - level)
    lo = (n - 1) * var / chi2.ppf(1.0 - tail, n - 1)
    hi = (n - 1) * var / chi2.ppf(tail, n - 1)
    return ReplicateStats(n, n_samples, est, float(np.mean(est)), var, (float(lo), float(hi)))


def replicate_variance(
    spec: Union[SamplerSpec, StepFn],
    observable: Observable,
    n_replicates: int,
    n_samples: int,
    master_seed: int,
    h: float,
    burn_in_fraction: float = 0.1,
    initial=None,
    dim: int = 2,
) -> ReplicateStats:
    """Serial replicate loop; the bench runner fans the same work out to a pool."""
    burn_in = int(np.floor(burn_in_fraction * n_samples))
    start = initial if initial is not None else initial_state(dim)
    estimates = []
    for r in range(n_replicates):
        cfg = ChainConfig(h, n_samples, burn_in, replicate_seed(master_seed, r), start)
        estimates.append(run_chain(_resolve_step_fn(spec), cfg, observable).time_average)
    return replicate_stats_from_estimates(estimates, n_samples)


def lag1_cross_correlation(estimates: Sequence[float]) -> float:
    """Correlation between consecutive replicate estimates; near 0 for independent seeds."""
    est = np.asarray(estimates, dtype=float)
    if est.size < 3 or np.all(est == est[0]):
        return 0.0
    return float(np.corrcoef(est[:-1], est[1:])[0, 1])


# ---------------------------------------------------------------------------
# Scaling fits


@dataclass(frozen=True, eq=False)
class ScalingFit:
    h_values: np.ndarray
    y_values: np.ndarray
    slope: float
    intercept: float
    r_squared: float


def loglog_slope(h_grid: Sequence[float], values: Sequence[float]) -> ScalingFit:
    """Least squares of log(values) on log(h)."""
    h = np.asarray(h_grid, dtype=float)
    y = np.asarray(values, dtype=float)
    if h.shape != y.shape:
        raise DomainError(f"h grid and values differ in length ({h.size} vs {y.size})")
    if h.size < 3:
        raise DomainError(f"need at least 3 points for a slope, got {h.size}")
    if np.any(h <= 0) or np.any(y <= 0):
        raise DomainError("log-log fit needs strictly positive h and values; drop zero-rejection points")
    fit = linregress(np.log(h), np.log(y))
    return ScalingFit(h, y, float(fit.slope), float(fit.intercept), float(fit.rvalue**2))

"""
Experiment runner: plans (method, h, replicate) work units, fans them out to a
process pool, reduces them by index and writes the CSV.
"""
from __future__ import annotations

import math
import os
import signal
from dataclasses import dataclass
from functools import lru_cache
from multiprocessing import Pool
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.bench.config import ExperimentConfig
from src.common.exceptions import ChainAbortedError
from src.common.logging_config import get_logger
from src.diagnostics.statistics import (
    integrated_autocorrelation_time,
    rejection_stats,
    replicate_stats_from_estimates,
)
from src.samplers.chain import ChainConfig, replicate_seed, run_chain
from src.samplers.factory import SamplerSpec, Transition, build_step_fn, initial_state
from src.targets.potentials import make_observable

logger = get_logger(__name__)

CSV_COLUMNS = [
    "experiment",
    "sampler",
    "kernel_or_integrator",
    "alpha",
    "h",
    "metric_name",
    "value",
    "stderr_or_ci_halfwidth",
    "n_samples",
    "n_replicates",
    "seed",
]
SORT_KEYS = ["sampler", "kernel_or_integrator", "alpha", "h", "metric_name"]


@dataclass(frozen=True)
class WorkUnit:
    method_index: int
    h_index: int
    replicate: int
    spec: SamplerSpec
    h: float
    seed: int
    n_steps: int
    burn_in: int
    observable: str
    initial_x: Optional[Tuple[float, ...]]
    initial_xi: int


@dataclass(frozen=True)
class UnitOutcome:
    method_index: int
    h_index: int
    replicate: int
    estimate: float = math.nan
    estimate_se: float = math.nan
    rate: float = math.nan
    rate_se: float = math.nan
    hybrid_rate: Optional[float] = None
    hybrid_rate_se: Optional[float] = None
    picard_iters: int = 0
    gradient_calls: int = 0
    error: Optional[ChainAbortedError] = None


def plan_units(cfg: ExperimentConfig) -> List[WorkUnit]:
    """Units ordered by method, then h, then replicate; replicate seeds are shared across methods and h."""
    seeds = [replicate_seed(cfg.master_seed, r) for r in range(cfg.n_replicates)]
    return [
        WorkUnit(
            method_index=m,
            h_index=k,
            replicate=r,
            spec=spec,
            h=h,
            seed=seeds[r],
            n_steps=cfg.n_samples,
            burn_in=cfg.burn_in,
            observable=cfg.observable,
            initial_x=cfg.initial_x,
            initial_xi=cfg.initial_xi,
        )
        for m, spec in enumerate(cfg.sampler_specs())
        for k, h in enumerate(cfg.h_grid)
        for r in range(cfg.n_replicates)
    ]


@lru_cache(maxsize=16)
def _step_fn(spec: SamplerSpec) -> Transition:
    return build_step_fn(spec)


def _run_unit(unit: WorkUnit) -> UnitOutcome:
    """Worker body; chain aborts come back as data so the parent decides what to do."""
    step_fn = _step_fn(unit.spec)
    dim = len(unit.initial_x) if unit.initial_x is not None else 2
    cfg = ChainConfig(
        h=unit.h,
        n_steps=unit.n_steps,
        burn_in=unit.burn_in,
        seed=unit.seed,
        initial_state=initial_state(dim, unit.initial_x, unit.initial_xi),
    )
    keys = dict(method_index=unit.method_index, h_index=unit.h_index, replicate=unit.replicate)
    try:
        result = run_chain(step_fn, cfg, make_observable(unit.observable))
    except ChainAbortedError as exc:
        return UnitOutcome(**keys, error=exc)

    stats = rejection_stats(result)
    f = result.f_values
    spread = float(np.var(f))
    estimate_se = math.sqrt(spread * integrated_autocorrelation_time(f) / f.size) if spread > 0 else 0.0
    return UnitOutcome(
        **keys,
        estimate=result.time_average,
        estimate_se=estimate_se,
        rate=stats.rate,
        rate_se=stats.stderr,
        hybrid_rate=stats.hybrid_rate,
        hybrid_rate_se=stats.hybrid_stderr,
        picard_iters=result.picard_iters,
        gradient_calls=result.gradient_calls or 0,
    )


def _ignore_sigint_initialiser():
    signal.signal(signal.SIGINT, signal.SIG_IGN)


def _collect(outcomes: Iterable[UnitOutcome], stop_on_abort: bool) -> List[UnitOutcome]:
    collected = []
    for outcome in outcomes:
        if stop_on_abort and outcome.error is not None:
            raise outcome.error
        collected.append(outcome)
    return collected


def execute_units(units: Sequence[WorkUnit], threads: int = 1, stop_on_abort: bool = False) -> List[UnitOutcome]:
    """Run units serially or on a pool; results come back in input order either way.

    With ``stop_on_abort`` the first aborted unit (in input order) is raised
    as soon as it is reached; the pool is terminated without waiting for the rest.
    """
    if threads <= 1 or len(units) <= 1:
        return _collect(map(_run_unit, units), stop_on_abort)
    with Pool(min(threads, len(units)), _ignore_sigint_initialiser) as pool:
        try:
            return _collect(
                pool.imap(_run_unit, units, chunksize=max(1, len(units) // (4 * threads))),
                stop_on_abort,
            )
        except KeyboardInterrupt:
            pool.terminate()
            pool.join()
            logger.error("Experiment interrupted; no output written")
            raise


# ---------------------------------------------------------------------------
# Reduction

def _row(cfg: ExperimentConfig, spec: SamplerSpec, h: float, metric: str, value: float, err: float) -> Dict:
    return {
        "experiment": cfg.experiment,
        "sampler": spec.sampler,
        "kernel_or_integrator": spec.method,
        "alpha": float(spec.alpha),
        "h": float(h),
        "metric_name": metric,
        "value": float(value),
        "stderr_or_ci_halfwidth": float(err),
        "n_samples": cfg.n_samples,
        "n_replicates": cfg.n_replicates,
        "seed": cfg.master_seed,
    }


def _pooled_rate(rates: Sequence[float], ses: Sequence[float]) -> Tuple[float, float]:
    n = len(rates)
    return float(np.mean(rates)), float(np.sqrt(np.sum(np.square(ses)))) / n


def reduce_outcomes(cfg: ExperimentConfig, outcomes: Sequence[UnitOutcome]) -> List[Dict]:
    """Turn unit outcomes into CSV rows.

    A (method, h) point with any aborted replicate raises the first abort when
    ``on_divergence`` is ``abort`` and is dropped with a warning when it is
    ``skip``.
    """
    specs = cfg.sampler_specs()
    grouped: Dict[Tuple[int, int], List[UnitOutcome]] = {}
    for o in sorted(outcomes, key=lambda o: (o.method_index, o.h_index, o.replicate)):
        grouped.setdefault((o.method_index, o.h_index), []).append(o)

    rows: List[Dict] = []
    variances: Dict[Tuple[int, int], Tuple[float, float]] = {}
    for (m, k), group in grouped.items():
        spec, h = specs[m], cfg.h_grid[k]
        failed = [o.error for o in group if o.error is not None]
        if failed:
            if cfg.on_divergence == "abort":
                raise failed[0]
            logger.warning(
                "Skipping %s at h=%g: %d of %d replicates aborted (%s)",
                spec.label, h, len(failed), len(group), failed[0].describe(),
            )
            continue

        if spec.sampler == "ghmala":
            rate, se = _pooled_rate([o.rate for o in group], [o.rate_se for o in group])
            rows.append(_row(cfg, spec, h, "rejection_rate_mala_substep", rate, se))
            rate, se = _pooled_rate([o.hybrid_rate for o in group], [o.hybrid_rate_se for o in group])
            rows.append(_row(cfg, spec, h, "rejection_rate_hybrid_substep", rate, se))
        else:
            rate, se = _pooled_rate([o.rate for o in group], [o.rate_se for o in group])
            rows.append(_row(cfg, spec, h, "rejection_rate", rate, se))

        if len(group) == 1:
            rows.append(_row(cfg, spec, h, "mean_estimate", group[0].estimate, group[0].estimate_se))
            continue
        stats = replicate_stats_from_estimates([o.estimate for o in group], cfg.n_samples)
        rows.append(_row(cfg, spec, h, "mean_estimate", stats.mean, math.sqrt(stats.variance / stats.n_replicates)))
        rows.append(_row(cfg, spec, h, "variance", stats.variance, stats.ci_halfwidth))
        variances[(m, k)] = (stats.variance, stats.n_replicates)

    mala = [i for i, s in enumerate(specs) if s.sampler == "mala"]
    if mala:
        for (m, k), (var, n) in variances.items():
            if m in mala or (mala[0], k) not in variances:
                continue
            ratio = variances[(mala[0], k)][0] / var if var > 0 else math.inf
            rows.append(_row(cfg, specs[m], cfg.h_grid[k], "variance_ratio_vs_mala", ratio, ratio * math.sqrt(4.0 / (n - 1))))

    return [r for r in rows if math.isfinite(r["value"]) and math.isfinite(r["stderr_or_ci_halfwidth"])]


def rows_to_frame(rows: Sequence[Dict]) -> pd.DataFrame:
    frame = pd.DataFrame(list(rows), columns=CSV_COLUMNS)
    return frame.sort_values(SORT_KEYS, kind="mergesort").reset_index(drop=True)


def write_csv(frame: pd.DataFrame, path: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.12e", lineterminator="\n", encoding="utf-8")


def summarize(cfg: ExperimentConfig, frame: pd.DataFrame, outcomes: Sequence[UnitOutcome]) -> str:
    """Human-readable table: one line per (method, h) with the headline metrics."""
    if frame.empty:
        return f"{cfg.experiment}: no rows"
    table = frame.pivot_table(
        index=["sampler", "kernel_or_integrator", "alpha", "h"],
        columns="metric_name",
        values="value",
        aggfunc="first",
    )
    steps = sum(cfg.n_samples for o in outcomes if o.error is None)
    picard = sum(o.picard_iters for o in outcomes)
    grads = sum(o.gradient_calls for o in outcomes)
    lines = [
        f"experiment={cfg.experiment} target={cfg.target} units={len(outcomes)} steps={steps}",
        f"gradient calls per step={grads / max(steps, 1):.3f} picard iterations per step={picard / max(steps, 1):.3f}",
        table.to_string(float_format=lambda v: f"{v:.4g}"),
    ]
    return "\n".join(lines)


def describe_plan(cfg: ExperimentConfig, units: Sequence[WorkUnit]) -> str:
    lines = [f"experiment={cfg.experiment} target={cfg.target} observable={cfg.observable} units={len(units)}"]
    for spec in cfg.sampler_specs():
        lines.append(f"  {spec.label:<32} alpha={spec.alpha:g} h_grid={list(cfg.h_grid)}")
    lines.append(
        f"  n_samples={cfg.n_samples} burn_in={cfg.burn_in} n_replicates={cfg.n_replicates} "
        f"output={cfg.output_path}"
    )
    return "\n".join(lines)


def run_experiment(
    cfg: ExperimentConfig,
    threads: int = 1,
    output_path: Optional[str] = None,
    dry_run: bool = False,
) -> Optional[pd.DataFrame]:
    """Run the sweep and write the CSV; raises ChainAbortedError on an aborting chain."""
    units = plan_units(cfg)
    if dry_run:
        print(describe_plan(cfg, units))
        return None
    path = output_path or cfg.output_path
    logger.info("Starting %s: %d work units on %d worker(s)", cfg.experiment, len(units), max(threads, 1))
    outcomes = execute_units(units, threads, stop_on_abort=cfg.on_divergence == "abort")
    frame = rows_to_frame(reduce_outcomes(cfg, outcomes))
    write_csv(frame, path)
    print(summarize(cfg, frame, outcomes))
    logger.info("Finished %s: %d rows written to %s", cfg.experiment, len(frame), path)
    return frame

"""
Fit log-log slopes of rejection rate against h from an experiment CSV.

    PYTHONPATH=. python scripts/fit_scaling_slopes.py results/rejection_all.csv
"""
import argparse

import pandas as pd

from src.common.exceptions import DomainError
from src.diagnostics.statistics import loglog_slope

RATE_METRICS = ("rejection_rate", "rejection_rate_mala_substep", "rejection_rate_hybrid_substep")


def fit_slopes(csv_path: str) -> pd.DataFrame:
    frame = pd.read_csv(csv_path)
    frame = frame[frame["metric_name"].isin(RATE_METRICS)]
    fits = []
    for (sampler, method, alpha, metric), group in frame.groupby(
        ["sampler", "kernel_or_integrator", "alpha", "metric_name"], sort=True
    ):
        group = group[group["value"] > 0].sort_values("h")
        try:
            fit = loglog_slope(group["h"].to_numpy(), group["value"].to_numpy())
        except DomainError as e:
            print(f"Skipping {sampler}/{method} alpha={alpha} {metric}: {e}")
            continue
        fits.append(
            {
                "sampler": sampler,
                "kernel_or_integrator": method,
                "alpha": alpha,
                "metric_name": metric,
                "n_points": len(group),
                "slope": fit.slope,
                "r_squared": fit.r_squared,
            }
        )
    return pd.DataFrame(fits)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Fit rejection-rate scaling slopes")
    parser.add_argument("csv_path")
    args = parser.parse_args()
    print(fit_slopes(args.csv_path).to_string(index=False))

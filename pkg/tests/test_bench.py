import json
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from src.bench import config as bench_config
from src.bench import experiments
from src.bench.config import apply_overrides, load_config, parse_override, validate_config
from src.bench.experiments import CSV_COLUMNS, UnitOutcome, plan_units, run_experiment
from src.bench.main import EXIT_CHAIN, EXIT_CONFIG, EXIT_OK, main
from src.common.exceptions import ChainAbortedError, ConfigurationError
from src.diagnostics.statistics import loglog_slope


def _errors(raw):
    with pytest.raises(ConfigurationError) as info:
        validate_config(raw)
    return info.value.errors


def _write(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


SMALL_CUSTOM = {
    "experiment": "custom",
    "master_seed": 11,
    "sampler": "gmala",
    "kernel": "q2",
    "h_grid": [0.05, 0.1],
    "n_samples": 300,
    "n_replicates": 3,
}


def test_missing_master_seed_is_named():
    assert any(e.startswith("$.master_seed") for e in _errors({"experiment": "custom"}))


def test_nonpositive_h_is_rejected():
    errors = _errors({**SMALL_CUSTOM, "h_grid": [0, 0.1]})
    assert "$.h_grid[0]: h must be positive" in errors


def test_h_grid_must_ascend():
    assert "$.h_grid: must be strictly ascending" in _errors({**SMALL_CUSTOM, "h_grid": [0.2, 0.1]})


def test_unknown_keys_and_all_errors_collected():
    errors = _errors({**SMALL_CUSTOM, "n_steps": 0, "n_samples": 0, "alpha": "big"})
    assert "$.n_steps: unknown key" in errors
    assert "$.n_samples: must be a positive integer" in errors
    assert "$.alpha: must be a finite number" in errors


def test_method_keys_only_for_custom():
    errors = _errors({"experiment": "variance_quartic", "master_seed": 1, "kernel": "q2"})
    assert "$.kernel: only allowed for experiment 'custom'" in errors


def test_q3_needs_target_with_hessian(monkeypatch):
    info = bench_config.TARGET_PRESETS["std_gaussian"]
    monkeypatch.setitem(bench_config.TARGET_PRESETS, "std_gaussian", replace(info, has_hessian=False))
    errors = _errors({**SMALL_CUSTOM, "kernel": "q3"})
    assert any("q3 needs a Hessian" in e for e in errors)


def test_capability_checks_for_integrators():
    errors = _errors({"experiment": "variance_quartic", "master_seed": 1, "target": "warped_gaussian"})
    assert any("explicit_splitting needs a separable target" in e for e in errors)
    errors = _errors({**SMALL_CUSTOM, "sampler": "ghmala", "kernel": None, "integrator": "conjugated_midpoint"})
    assert any(e.startswith("$.psi") for e in errors)


def test_preset_defaults_and_user_overrides():
    cfg = validate_config({"experiment": "rejection_all", "master_seed": 5, "n_samples": 1000})
    assert cfg.target == "anisotropic"
    assert cfg.n_samples == 1000
    assert len(cfg.h_grid) == 8
    assert cfg.h_grid[0] == pytest.approx(0.005) and cfg.h_grid[-1] == pytest.approx(0.16)
    alphas = [s.alpha for s in cfg.sampler_specs() if s.sampler == "ghmala"]
    assert alphas == [pytest.approx(1.0), pytest.approx(0.1)]


def test_overrides():
    assert parse_override("h_grid=[0.1, 0.2]") == ("h_grid", [0.1, 0.2])
    assert parse_override("target=anisotropic") == ("target", "anisotropic")
    assert parse_override("truncation_radius=null") == ("truncation_radius", None)
    with pytest.raises(ConfigurationError):
        parse_override("n_samples")
    merged = apply_overrides({"n_samples": 10}, ["n_samples=20"])
    assert merged["n_samples"] == 20


def test_load_config_reports_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_config(str(path))


def test_replicates_share_seeds_across_methods():
    cfg = validate_config({"experiment": "variance_quartic", "master_seed": 3, "n_replicates": 4})
    units = plan_units(cfg)
    assert len(units) == 2 * 5 * 4
    by_replicate = {}
    for u in units:
        by_replicate.setdefault(u.replicate, set()).add(u.seed)
    assert all(len(seeds) == 1 for seeds in by_replicate.values())


def test_cli_run_writes_deterministic_csv(tmp_path):
    cfg_path = _write(tmp_path, SMALL_CUSTOM)
    first, second, parallel = (str(tmp_path / n) for n in ("a.csv", "b.csv", "c.csv"))
    assert main(["run", "--config", cfg_path, "--output", first]) == EXIT_OK
    assert main(["run", "--config", cfg_path, "--output", second]) == EXIT_OK
    assert main(["run", "--config", cfg_path, "--output", parallel, "--threads", "2"]) == EXIT_OK

    with open(first, "rb") as f:
        content = f.read()
    assert content == open(second, "rb").read() == open(parallel, "rb").read()
    assert b"\r\n" not in content

    frame = pd.read_csv(first)
    assert list(frame.columns) == CSV_COLUMNS
    assert set(frame["metric_name"]) == {"rejection_rate", "mean_estimate", "variance"}
    assert list(frame["h"]) == sorted(frame["h"])
    assert np.all(np.isfinite(frame["value"]))


def test_cli_override_changes_output(tmp_path):
    cfg_path = _write(tmp_path, SMALL_CUSTOM)
    out = str(tmp_path / "o.csv")
    assert main(["run", "--config", cfg_path, "--output", out, "--override", "n_replicates=1"]) == EXIT_OK
    frame = pd.read_csv(out)
    assert "variance" not in set(frame["metric_name"])
    assert set(frame["n_replicates"]) == {1}


def test_variance_preset_emits_ratio_rows(tmp_path):
    out = str(tmp_path / "v.csv")
    cfg = validate_config(
        {
            "experiment": "variance_anisotropic",
            "master_seed": 2,
            "h_grid": [0.02, 0.05],
            "n_samples": 200,
            "n_replicates": 4,
        }
    )
    frame = run_experiment(cfg, output_path=out)
    ratios = frame[frame["metric_name"] == "variance_ratio_vs_mala"]
    assert set(ratios["sampler"]) <= {"gmala", "ghmala"}
    ghmala = frame[frame["sampler"] == "ghmala"]
    assert {"rejection_rate_mala_substep", "rejection_rate_hybrid_substep"} <= set(ghmala["metric_name"])


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg_path = _write(tmp_path, {**SMALL_CUSTOM, "n_samples": 0})
    out = tmp_path / "never.csv"
    assert main(["run", "--config", cfg_path, "--output", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    assert "$.n_samples" in capsys.readouterr().err


DIVERGENT = {
    "experiment": "custom",
    "master_seed": 1,
    "target": "anisotropic",
    "sampler": "gmala",
    "kernel": "q2",
    "alpha": 50.0,
    "h_grid": [1.0],
    "n_samples": 50,
}


def test_cli_chain_abort_exit_code(tmp_path, capsys):
    cfg_path = _write(tmp_path, DIVERGENT)
    assert main(["run", "--config", cfg_path, "--output", str(tmp_path / "x.csv")]) == EXIT_CHAIN
    err = capsys.readouterr().err
    assert "chain aborted: sampler=gmala-q2 h=1" in err
    assert "residual=" in err


def test_divergent_points_can_be_skipped(tmp_path):
    cfg_path = _write(tmp_path, {**DIVERGENT, "h_grid": [0.01, 1.0], "on_divergence": "skip"})
    out = str(tmp_path / "skip.csv")
    assert main(["run", "--config", cfg_path, "--output", out]) == EXIT_OK
    frame = pd.read_csv(out)
    assert set(frame["h"]) == {0.01}


def test_abort_stops_at_first_failed_unit(monkeypatch):
    cfg = validate_config({**DIVERGENT, "h_grid": [1.0, 2.0], "n_replicates": 3})
    units = plan_units(cfg)
    calls = []

    def fake_run(unit):
        calls.append(unit)
        error = ChainAbortedError("diverged", step=1, seed=unit.seed, h=unit.h, residual=1.0, sampler="gmala-q2")
        return UnitOutcome(unit.method_index, unit.h_index, unit.replicate, error=error)

    monkeypatch.setattr(experiments, "_run_unit", fake_run)
    with pytest.raises(ChainAbortedError):
        experiments.execute_units(units, threads=1, stop_on_abort=True)
    assert len(calls) == 1

    calls.clear()
    outcomes = experiments.execute_units(units, threads=1)
    assert len(calls) == len(outcomes) == len(units)


def test_variance_presets_reach_both_step_size_regimes():
    aniso = validate_config({"experiment": "variance_anisotropic", "master_seed": 1})
    # Picard contraction on the anisotropic target is h * alpha
    assert any(h * aniso.alpha <= 0.5 for h in aniso.h_grid)
    assert max(aniso.h_grid) >= 1.0
    assert aniso.on_divergence == "skip"

    quartic = validate_config({"experiment": "variance_quartic", "master_seed": 1})
    assert quartic.h_grid[-1] * quartic.alpha >= 5.0




def test_dry_run_writes_nothing(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(bench_config, "DRY_RUN", True)
    cfg_path = _write(tmp_path, SMALL_CUSTOM)
    out = tmp_path / "dry.csv"
    assert main(["run", "--config", cfg_path, "--output", str(out)]) == EXIT_OK
    assert not out.exists()
    assert "units=6" in capsys.readouterr().out


@pytest.mark.slow
def test_rejection_orders_at_desk_scale(tmp_path):
    cfg = validate_config({"experiment": "rejection_all", "master_seed": 20240611})
    frame = run_experiment(cfg, threads=bench_config.BENCH_THREADS, output_path=str(tmp_path / "r.csv"))

    def slope(sampler, method, metric, alpha=1.0):
        rows = frame[
            (frame["sampler"] == sampler)
            & (frame["kernel_or_integrator"] == method)
            & (frame["metric_name"] == metric)
            & np.isclose(frame["alpha"], alpha)
            & (frame["value"] > 0)
        ]
        return loglog_slope(rows["h"].to_numpy(), rows["value"].to_numpy()).slope

    assert 0.8 <= slope("gmala", "q1", "rejection_rate") <= 1.2
    assert 1.3 <= slope("gmala", "q2", "rejection_rate") <= 1.7
    assert 1.3 <= slope("gmala", "q3", "rejection_rate") <= 1.7
    assert 2.5 <= slope("ghmala", "midpoint", "rejection_rate_hybrid_substep") <= 3.5

    # MALA substep rate of GHMALA does not depend on alpha
    sub = frame[(frame["sampler"] == "ghmala") & (frame["metric_name"] == "rejection_rate_mala_substep")]
    strong = sub[np.isclose(sub["alpha"], 1.0)].set_index("h")
    weak = sub[np.isclose(sub["alpha"], 0.1)].set_index("h")
    gap = (strong["value"] - weak["value"]).abs()
    combined = np.hypot(strong["stderr_or_ci_halfwidth"], weak["stderr_or_ci_halfwidth"])
    assert bool((gap <= 3 * combined + 1e-12).all())


def _best_variance(frame, sampler):
    rows = frame[(frame["sampler"] == sampler) & (frame["metric_name"] == "variance")]
    return rows.loc[rows["value"].idxmin()]


@pytest.mark.slow
def test_anisotropic_variance_reduction_at_desk_scale(tmp_path):
    cfg = validate_config({"experiment": "variance_anisotropic", "master_seed": 20240611})
    frame = run_experiment(cfg, threads=bench_config.BENCH_THREADS, output_path=str(tmp_path / "a.csv"))
    mala, gmala = _best_variance(frame, "mala"), _best_variance(frame, "gmala")
    assert mala["value"] / gmala["value"] >= 4
    assert gmala["value"] + gmala["stderr_or_ci_halfwidth"] < mala["value"] - mala["stderr_or_ci_halfwidth"]


@pytest.mark.slow
def test_warped_and_quartic_orderings_at_desk_scale(tmp_path):
    warped = validate_config({"experiment": "variance_warped", "master_seed": 20240611})
    frame = run_experiment(warped, threads=bench_config.BENCH_THREADS, output_path=str(tmp_path / "w.csv"))
    assert _best_variance(frame, "mala")["value"] / _best_variance(frame, "ghmala")["value"] >= 10

    variances = frame[frame["metric_name"] == "variance"]
    gmala_h = variances[variances["sampler"] == "gmala"]["h"]
    h_star = gmala_h.max()
    at = variances[np.isclose(variances["h"], h_star)].set_index("sampler")["value"]
    assert at["ghmala"] <= at["gmala"]

    quartic = validate_config({"experiment": "variance_quartic", "master_seed": 20240611})
    frame = run_experiment(quartic, threads=bench_config.BENCH_THREADS, output_path=str(tmp_path / "q.csv"))
    variances = frame[frame["metric_name"] == "variance"]
    small_h = variances["h"].min()
    at_small = variances[np.isclose(variances["h"], small_h)].set_index("sampler")["value"]
    assert at_small["mala"] / at_small["ghmala"] >= 10
    ghmala = variances[variances["sampler"] == "ghmala"].sort_values("h")
    assert ghmala["value"].iloc[-1] > ghmala["value"].min()
    hybrid = frame[(frame["sampler"] == "ghmala") & (frame["metric_name"] == "rejection_rate_hybrid_substep")]
    hybrid = hybrid.sort_values("h")
    assert hybrid["value"].iloc[-1] > hybrid["value"].iloc[0]

"""
Experiment configuration: preset table, JSON loading, overrides and validation.

Env vars:
  BENCH_THREADS  worker processes when --threads is not given (default 1)
  DRY_RUN        validate and print the plan without running chains
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.common.exceptions import ConfigurationError
from src.integrators.hamiltonian import INTEGRATOR_NAMES, PSI_PRESETS
from src.proposals.kernels import KERNEL_NAMES
from src.samplers.factory import SAMPLER_NAMES, SamplerSpec
from src.targets.potentials import OBSERVABLE_PRESETS, TARGET_PRESETS

BENCH_THREADS = int(os.getenv("BENCH_THREADS", "1"))
DRY_RUN = os.getenv("DRY_RUN", "false").lower() in {"1", "true", "yes", "y"}

MAX_SEED = 2**63


@dataclass(frozen=True)
class Method:
    """One sampler of a comparison preset; ``alpha_scale`` multiplies the config alpha."""

    sampler: str
    kernel: Optional[str] = None
    integrator: Optional[str] = None
    psi: Optional[str] = None
    alpha_scale: float = 1.0


REJECTION_GRID = [float(h) for h in np.geomspace(0.005, 0.16, 8)]

BASE_DEFAULTS: Dict[str, Any] = {
    "target": "std_gaussian",
    "observable": "radius_squared",
    "sampler": None,
    "kernel": None,
    "integrator": None,
    "psi": None,
    "alpha": 1.0,
    "h_grid": [0.1],
    "n_samples": 10_000,
    "n_replicates": 1,
    "burn_in_fraction": 0.1,
    "picard_tol": 1e-12,
    "picard_max_iter": 100,
    "truncation_radius": None,
    "initial_x": None,
    "initial_xi": 1,
    "on_divergence": "abort",
    "output_path": None,
}

PRESETS: Dict[str, Dict[str, Any]] = {
    "rejection_q1_vs_q2": {
        "defaults": {"target": "anisotropic", "alpha": 1.0, "h_grid": REJECTION_GRID, "n_samples": 20_000},
        "methods": [Method("gmala", kernel="q1"), Method("gmala", kernel="q2")],
    },
    "rejection_all": {
        "defaults": {"target": "anisotropic", "alpha": 1.0, "h_grid": REJECTION_GRID, "n_samples": 20_000},
        "methods": [
            Method("mala"),
            Method("gmala", kernel="q1"),
            Method("gmala", kernel="q2"),
            Method("gmala", kernel="q3"),
            Method("ghmala", integrator="midpoint"),
            Method("ghmala", integrator="midpoint", alpha_scale=0.1),
        ],
    },
    "variance_anisotropic": {
        "defaults": {
            "target": "anisotropic",
            "observable": "indicator_tail_quadratic",
            "alpha": 10.0,
            "h_grid": [0.02, 0.05, 0.3, 1.0],
            "n_samples": 20_000,
            "n_replicates": 100,
            "on_divergence": "skip",
        },
        "methods": [Method("mala"), Method("gmala", kernel="q2"), Method("ghmala", integrator="midpoint")],
    },
    "variance_warped": {
        "defaults": {
            "target": "warped_gaussian",
            "observable": "radius_squared",
            "alpha": 5.0,
            "h_grid": [0.01, 0.02, 0.05, 0.1],
            "n_samples": 20_000,
            "n_replicates": 100,
            "truncation_radius": 100.0,
            "initial_x": [0.0, 5.0],
            "on_divergence": "skip",
        },
        "methods": [
            Method("mala"),
            Method("gmala", kernel="q2"),
            Method("ghmala", integrator="conjugated_midpoint", psi="warped_shear"),
        ],
    },
    "variance_quartic": {
        "defaults": {
            "target": "quartic_gaussian",
            "observable": "radius_squared",
            "alpha": 5.0,
            "h_grid": [0.01, 0.03, 0.1, 0.3, 1.0],
            "n_samples": 20_000,
            "n_replicates": 100,
        },
        "methods": [Method("mala"), Method("ghmala", integrator="explicit_splitting")],
    },
    "custom": {
        "defaults": {"sampler": "mala", "h_grid": [0.1], "n_samples": 10_000},
        "methods": None,
    },
}

CUSTOM_ONLY_KEYS = ("sampler", "kernel", "integrator", "psi")
REQUIRED_KEYS = ("experiment", "master_seed")
KNOWN_KEYS = set(BASE_DEFAULTS) | set(REQUIRED_KEYS)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    master_seed: int
    target: str
    observable: str
    methods: Tuple[Method, ...]
    alpha: float
    h_grid: Tuple[float, ...]
    n_samples: int
    n_replicates: int
    burn_in_fraction: float
    picard_tol: float
    picard_max_iter: int
    truncation_radius: Optional[float]
    initial_x: Optional[Tuple[float, ...]]
    initial_xi: int
    on_divergence: str
    output_path: str

    @property
    def burn_in(self) -> int:
        return int(math.floor(self.burn_in_fraction * self.n_samples))

    def sampler_specs(self) -> List[SamplerSpec]:
        return [
            SamplerSpec(
                sampler=m.sampler,
                target=self.target,
                kernel=m.kernel,
                integrator=m.integrator,
                psi=m.psi,
                alpha=0.0 if m.sampler == "mala" else self.alpha * m.alpha_scale,
                truncation_radius=self.truncation_radius,
                picard_tol=self.picard_tol,
                picard_max_iter=self.picard_max_iter,
            )
            for m in self.methods
        ]


# ---------------------------------------------------------------------------
# Field checks. Each returns an error message or None.

def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _check_h_grid(value) -> List[str]:
    if not isinstance(value, list) or not value:
        return ["$.h_grid: must be a non-empty array of numbers"]
    errors = []
    for i, h in enumerate(value):
        if not _is_number(h):
            errors.append(f"$.h_grid[{i}]: must be a finite number")
        elif h <= 0:
            errors.append(f"$.h_grid[{i}]: h must be positive")
    if not errors and any(b <= a for a, b in zip(value, value[1:])):
        errors.append("$.h_grid: must be strictly ascending")
    return errors


def _check_method(m: Method, target: str, path: str) -> List[str]:
    errors = []
    info = TARGET_PRESETS.get(target)
    if m.sampler not in SAMPLER_NAMES:
        return [f"{path}.sampler: unknown sampler {m.sampler!r} (known: {list(SAMPLER_NAMES)})"]
    if m.sampler == "gmala":
        if m.kernel not in KERNEL_NAMES:
            errors.append(f"{path}.kernel: gmala needs one of {list(KERNEL_NAMES)}, got {m.kernel!r}")
        elif m.kernel == "q3" and info is not None and not info.has_hessian:
            errors.append(f"{path}.kernel: q3 needs a Hessian but target {target!r} has none")
    if m.sampler == "ghmala":
        if m.integrator not in INTEGRATOR_NAMES:
            errors.append(f"{path}.integrator: ghmala needs one of {list(INTEGRATOR_NAMES)}, got {m.integrator!r}")
        elif m.integrator == "explicit_splitting" and info is not None and not info.separable:
            errors.append(f"{path}.integrator: explicit_splitting needs a separable target, {target!r} is not")
        elif m.integrator == "conjugated_midpoint":
            if m.psi not in PSI_PRESETS:
                errors.append(f"{path}.psi: conjugated_midpoint needs one of {list(PSI_PRESETS)}, got {m.psi!r}")
            elif target != "warped_gaussian":
                errors.append(f"{path}.psi: {m.psi!r} only applies to target 'warped_gaussian'")
    return errors


def validate_config(raw: Any) -> ExperimentConfig:
    """Validate a raw JSON object; every problem is collected before raising."""
    if not isinstance(raw, Mapping):
        raise ConfigurationError("$: config must be a JSON object", ["$: config must be a JSON object"])

    errors: List[str] = []
    for key in sorted(set(raw) - KNOWN_KEYS):
        errors.append(f"$.{key}: unknown key")
    for key in REQUIRED_KEYS:
        if key not in raw:
            errors.append(f"$.{key}: required field is missing")

    experiment = raw.get("experiment")
    preset = PRESETS.get(experiment) if isinstance(experiment, str) else None
    if "experiment" in raw and preset is None:
        errors.append(f"$.experiment: unknown experiment {experiment!r} (known: {sorted(PRESETS)})")

    seed = raw.get("master_seed")
    if "master_seed" in raw and not (_is_int(seed) and 0 <= seed < MAX_SEED):
        errors.append("$.master_seed: must be an integer in [0, 2^63)")

    if preset is not None and experiment != "custom":
        for key in CUSTOM_ONLY_KEYS:
            if key in raw:
                errors.append(f"$.{key}: only allowed for experiment 'custom'")

    merged = dict(BASE_DEFAULTS)
    if preset is not None:
        merged.update(preset["defaults"])
    merged.update({k: v for k, v in raw.items() if k in BASE_DEFAULTS})

    target = merged["target"]
    if target not in TARGET_PRESETS:
        errors.append(f"$.target: unknown target {target!r} (known: {sorted(TARGET_PRESETS)})")
    if merged["observable"] not in OBSERVABLE_PRESETS:
        errors.append(f"$.observable: unknown observable {merged['observable']!r} (known: {sorted(OBSERVABLE_PRESETS)})")
    if not _is_number(merged["alpha"]):
        errors.append("$.alpha: must be a finite number")
    errors.extend(_check_h_grid(merged["h_grid"]))
    if not (_is_int(merged["n_samples"]) and merged["n_samples"] >= 1):
        errors.append("$.n_samples: must be a positive integer")
    if not (_is_int(merged["n_replicates"]) and merged["n_replicates"] >= 1):
        errors.append("$.n_replicates: must be a positive integer")
    if not (_is_number(merged["burn_in_fraction"]) and 0 <= merged["burn_in_fraction"] < 1):
        errors.append("$.burn_in_fraction: must be in [0, 1)")
    if not (_is_number(merged["picard_tol"]) and merged["picard_tol"] > 0):
        errors.append("$.picard_tol: must be positive")
    if not (_is_int(merged["picard_max_iter"]) and merged["picard_max_iter"] >= 1):
        errors.append("$.picard_max_iter: must be a positive integer")
    radius = merged["truncation_radius"]
    if radius is not None and not (_is_number(radius) and radius > 0):
        errors.append("$.truncation_radius: must be positive or null")
    initial_x = merged["initial_x"]
    if initial_x is not None:
        dim = TARGET_PRESETS[target].dim if target in TARGET_PRESETS else None
        if not isinstance(initial_x, list) or not all(_is_number(v) for v in initial_x):
            errors.append("$.initial_x: must be an array of finite numbers or null")
        elif dim is not None and len(initial_x) != dim:
            errors.append(f"$.initial_x: must have length {dim} for target {target!r}")
    if merged["initial_xi"] not in (-1, 1) or isinstance(merged["initial_xi"], bool):
        errors.append("$.initial_xi: must be -1 or 1")
    if merged["on_divergence"] not in ("abort", "skip"):
        errors.append("$.on_divergence: must be 'abort' or 'skip'")
    if merged["output_path"] is not None and not isinstance(merged["output_path"], str):
        errors.append("$.output_path: must be a string or null")

    methods: Tuple[Method, ...] = ()
    if preset is not None:
        if preset["methods"] is None:
            methods = (Method(merged["sampler"], merged["kernel"], merged["integrator"], merged["psi"]),)
            errors.extend(_check_method(methods[0], target, "$"))
        else:
            methods = tuple(preset["methods"])
            for i, m in enumerate(methods):
                errors.extend(_check_method(m, target, f"$.experiment[{experiment}].methods[{i}]"))

    if errors:
        raise ConfigurationError(f"{len(errors)} configuration error(s)", errors)

    return ExperimentConfig(
        experiment=experiment,
        master_seed=int(seed),
        target=target,
        observable=merged["observable"],
        methods=methods,
        alpha=float(merged["alpha"]),
        h_grid=tuple(float(h) for h in merged["h_grid"]),
        n_samples=int(merged["n_samples"]),
        n_replicates=int(merged["n_replicates"]),
        burn_in_fraction=float(merged["burn_in_fraction"]),
        picard_tol=float(merged["picard_tol"]),
        picard_max_iter=int(merged["picard_max_iter"]),
        truncation_radius=None if radius is None else float(radius),
        initial_x=None if initial_x is None else tuple(float(v) for v in initial_x),
        initial_xi=int(merged["initial_xi"]),
        on_divergence=merged["on_divergence"],
        output_path=merged["output_path"] or os.path.join("results", f"{experiment}.csv"),
    )


def parse_override(item: str) -> Tuple[str, Any]:
    """``key=value`` with value parsed as JSON, falling back to the raw string."""
    key, sep, value = item.partition("=")
    if not sep or not key:
        raise ConfigurationError(f"override {item!r} is not of the form key=value")
    try:
        return key.strip(), json.loads(value)
    except json.JSONDecodeError:
        return key.strip(), value


def apply_overrides(raw: Mapping[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    merged = dict(raw)
    for item in overrides:
        key, value = parse_override(item)
        merged[key] = value
    return merged


def load_config(path: str, overrides: Sequence[str] = ()) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"$: config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"$: invalid JSON in {path}: {exc}")
    if isinstance(raw, Mapping):
        raw = apply_overrides(raw, overrides)
    return validate_config(raw)

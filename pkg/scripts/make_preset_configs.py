"""
Write full-scale experiment configs (1000+ replicates of 10^5 steps).

These take hours; the desk-scale configs in configs/ are what CI runs.
"""
import json
import os

OUT_DIR = os.getenv("CONFIG_OUT_DIR", "configs/full_scale")
MASTER_SEED = int(os.getenv("MASTER_SEED", "20240611"))

FULL_SCALE = {
    "rejection_q1_vs_q2": {"n_samples": 100_000},
    "rejection_all": {"n_samples": 100_000},
    "variance_anisotropic": {"n_samples": 100_000, "n_replicates": 1000},
    "variance_warped": {"n_samples": 100_000, "n_replicates": 2000},
    "variance_quartic": {"n_samples": 100_000, "n_replicates": 2000},
}


def write_configs(out_dir: str = OUT_DIR) -> list:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for experiment, overrides in FULL_SCALE.items():
        cfg = {"experiment": experiment, "master_seed": MASTER_SEED, **overrides}
        cfg["output_path"] = os.path.join("results", "full_scale", f"{experiment}.csv")
        path = os.path.join(out_dir, f"{experiment}.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(cfg, f, indent=2)
            f.write("\n")
        paths.append(path)
        print(f"Wrote {path}")
    return paths


if __name__ == "__main__":
    write_configs()

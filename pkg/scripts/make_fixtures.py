"""Regenerate fixtures/*.yaml.

The 2-D normalization constants come from a 1000 x 1000 brute-force grid over
the unit square and are frozen into the files; tests re-derive them.
"""

from pathlib import Path

import yaml

from hypertpe.objectives import grid_extrema

ROOT = Path(__file__).resolve().parents[1] / "fixtures"

SSD_FILTERS = [64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512,
               1024, 1024, 256, 512, 128, 256, 128, 256]
SENSITIVITY = [3.0, 1.5, 2.0, 1.0, 1.5, 0.8, 0.8, 1.2, 0.6, 0.6, 0.9, 0.4, 0.4,
               0.5, 0.3, 0.6, 0.3, 0.5, 0.2, 0.4, 0.2]


def two_d(id_, tier, base_fn, rate_lo, rate_hi, noise, names):
    lo, hi, argmin = grid_extrema(base_fn, 1000)
    return {
        "id": id_,
        "tier": tier,
        "base_fn": base_fn,
        "rate_lo": rate_lo,
        "rate_hi": rate_hi,
        "noise_sigma": noise,
        "R": 81,
        "normalization": {"min": lo, "max": hi, "argmin_unit": [float(v) for v in argmin],
                          "grid": 1000},
        "optimum": 1.0,
        "repetitions": 10,
        "defaults": {"R": 81, "eta": 3},
        "space": names,
    }


def main():
    ROOT.mkdir(exist_ok=True)
    easy = two_d("EASY", "easy", "rosenbrock", 10.0, 20.0, 0.005, [
        {"name": "learning_rate", "kind": "log-uniform", "low": 1e-4, "high": 1.0},
        {"name": "batch_size", "kind": "uniform", "low": 16.0, "high": 512.0},
    ])
    medium = two_d("MEDIUM", "medium", "ackley", 4.0, 12.0, 0.01, [
        {"name": "learning_rate", "kind": "log-uniform", "low": 1e-5, "high": 1e-1},
        {"name": "weight_decay", "kind": "log-uniform", "low": 1e-6, "high": 1e-2},
    ])
    hard = {
        "id": "HARD",
        "tier": "hard",
        "base_fn": "composite",
        "rate_lo": 40.0,
        "rate_hi": 120.0,
        "noise_sigma": 0.005,
        "R": 81,
        "repetitions": 1,
        "defaults": {"R": 81, "eta": 3},
        "composite": {
            "alpha": 100.0,
            "filters": SSD_FILTERS,
            "sensitivity": SENSITIVITY,
            "sharpness": 12.0,
            "map_max": 0.8,
            "fps_scale": 15.0,
            "fps_offset": 0.2,
        },
        "space": [{"name": f"K{j:02d}", "kind": "integer", "low": 1, "high": n}
                  for j, n in enumerate(SSD_FILTERS)],
    }
    for d in (easy, medium, hard):
        path = ROOT / f"{d['id'].lower()}.yaml"
        path.write_text(yaml.safe_dump(d, sort_keys=False))
        print("wrote", path)


if __name__ == "__main__":
    main()

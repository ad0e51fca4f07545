"""Synthetic multi-fidelity objectives.

Each benchmark turns a configuration and a resource ``r <= R`` into a score
shaped like a training curve::

    asymptote(x) * (1 - exp(-rate(x) * r / R)) + noise

``asymptote`` comes from a standard test function rescaled to [0, 1] (1 at the
function's minimum), ``rate`` is a per-configuration convergence speed, so
cheap evaluations rank configurations only approximately.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np
import yaml

from .space import Configuration, SearchSpace, to_unit


class ResourceOutOfRange(ValueError):
    pass


class MissingMetric(KeyError):
    pass


@dataclass(frozen=True)
class EvaluationRequest:
    config: Configuration
    resource: float
    trial_seed: int


@dataclass(frozen=True)
class EvaluationResult:
    metrics: dict[str, float]
    objective: float


# --- base functions, all defined on the unit square -------------------------

def branin(u: np.ndarray) -> np.ndarray:
    x1 = -5.0 + 15.0 * u[..., 0]
    x2 = 15.0 * u[..., 1]
    a = x2 - 5.1 / (4 * np.pi**2) * x1**2 + 5.0 / np.pi * x1 - 6.0
    return a**2 + 10.0 * (1 - 1 / (8 * np.pi)) * np.cos(x1) + 10.0


def rosenbrock(u: np.ndarray) -> np.ndarray:
    x = -2.0 + 4.0 * u[..., 0]
    y = -1.0 + 4.0 * u[..., 1]
    return 100.0 * (y - x**2) ** 2 + (1.0 - x) ** 2


def ackley(u: np.ndarray) -> np.ndarray:
    x = -5.0 + 10.0 * u[..., 0]
    y = -5.0 + 10.0 * u[..., 1]
    return (
        -20.0 * np.exp(-0.2 * np.sqrt(0.5 * (x * x + y * y)))
        - np.exp(0.5 * (np.cos(2 * np.pi * x) + np.cos(2 * np.pi * y)))
        + np.e
        + 20.0
    )


BASE_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "branin": branin,
    "rosenbrock": rosenbrock,
    "ackley": ackley,
}


def grid_extrema(base_fn: str, points_per_axis: int = 1000) -> tuple[float, float, np.ndarray]:
    """Brute-force (min, max, argmin) of a 2-D base function over a full grid of [0, 1]^2."""
    fn = BASE_FUNCTIONS[base_fn]
    axis = np.linspace(0.0, 1.0, points_per_axis)
    u1, u2 = np.meshgrid(axis, axis, indexing="ij")
    values = fn(np.stack([u1, u2], axis=-1))
    i = np.unravel_index(np.argmin(values), values.shape)
    return float(values.min()), float(values.max()), np.array([axis[i[0]], axis[i[1]]])


def hash01(units: np.ndarray) -> float:
    """Stable map of a unit-coordinate vector into [0, 1]."""
    data = np.ascontiguousarray(units, dtype="<f8").tobytes()
    digest = hashlib.blake2b(data, digest_size=8).digest()
    return int.from_bytes(digest, "little") / float(2**64 - 1)


@dataclass(frozen=True)
class SyntheticCurveSpec:
    base_fn: str
    rate_lo: float
    rate_hi: float
    noise_sigma: float
    R: float
    space: SearchSpace
    f_min: float = 0.0
    f_max: float = 1.0

    def __post_init__(self) -> None:
        if self.base_fn not in BASE_FUNCTIONS and self.base_fn != "composite":
            raise ValueError(f"unknown base function {self.base_fn!r}")
        if not 0 < self.rate_lo <= self.rate_hi:
            raise ValueError("need 0 < rate_lo <= rate_hi")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not self.R > 0:
            raise ValueError("R must be positive")
        if not self.f_min < self.f_max:
            raise ValueError("need f_min < f_max")

    def rate(self, units: np.ndarray) -> float:
        return self.rate_lo + (self.rate_hi - self.rate_lo) * hash01(units)

    def asymptote(self, units: np.ndarray) -> float:
        f = float(BASE_FUNCTIONS[self.base_fn](units))
        a = 1.0 - (f - self.f_min) / (self.f_max - self.f_min)
        return min(max(a, 0.0), 1.0)


def _check_resource(resource: float, R: float) -> None:
    if not (resource > 0 and resource <= R * (1 + 1e-12)):
        raise ResourceOutOfRange(f"resource {resource!r} outside (0, {R}]")


def _noise(sigma: float, trial_seed: int, resource: float) -> float:
    if sigma == 0:
        return 0.0
    rng = np.random.default_rng([int(trial_seed) & 0xFFFFFFFFFFFFFFFF, int(math.floor(resource))])
    return float(sigma * rng.standard_normal())


def learning_curve(asymptote: float, rate: float, resource: float, R: float) -> float:
    return asymptote * -math.expm1(-rate * resource / R)


def evaluate_synthetic(spec: SyntheticCurveSpec, req: EvaluationRequest) -> EvaluationResult:
    _check_resource(req.resource, spec.R)
    units = to_unit(spec.space, req.config)
    value = learning_curve(spec.asymptote(units), spec.rate(units), req.resource, spec.R)
    value += _noise(spec.noise_sigma, req.trial_seed, req.resource)
    return EvaluationResult({"accuracy": value}, value)


def combine_metrics(alpha: float, metrics: Mapping[str, float]) -> float:
    """``alpha * map + fps``."""
    for key in ("map", "fps"):
        if key not in metrics:
            raise MissingMetric(key)
        if not math.isfinite(metrics[key]):
            raise ValueError(f"metric {key} is not finite: {metrics[key]!r}")
    return alpha * metrics["map"] + metrics["fps"]


@dataclass(frozen=True)
class CompositeSpec:
    """Accuracy / speed trade-off over per-layer ranks ``K_j`` in ``[1, N_j]``.

    ``map`` saturates in every ``K_j / N_j`` with per-layer sensitivity; ``fps``
    falls with the total rank ``sum(K_j)``.
    """

    curve: SyntheticCurveSpec
    alpha: float
    filters: tuple[int, ...]
    sensitivity: tuple[float, ...]
    sharpness: float
    map_max: float
    fps_scale: float
    fps_offset: float

    def __post_init__(self) -> None:
        if len(self.filters) != len(self.sensitivity) or len(self.filters) != len(self.curve.space):
            raise ValueError("filters, sensitivity and space must have the same length")

    def ranks(self, config: Configuration) -> np.ndarray:
        return np.array([config[p.name] for p in self.curve.space.params], dtype=np.float64)

    def map_asymptote(self, config: Configuration) -> float:
        frac = self.ranks(config) / np.asarray(self.filters, dtype=np.float64)
        loss = np.asarray(self.sensitivity) * np.exp(-self.sharpness * frac)
        return self.map_max * math.exp(-float(loss.sum()))

    def fps(self, config: Configuration) -> float:
        total = float(self.ranks(config).sum()) / float(sum(self.filters))
        return self.fps_scale / (self.fps_offset + total)


def evaluate_composite_synthetic(spec: CompositeSpec, req: EvaluationRequest) -> EvaluationResult:
    curve = spec.curve
    _check_resource(req.resource, curve.R)
    units = to_unit(curve.space, req.config)
    m = learning_curve(spec.map_asymptote(req.config), curve.rate(units), req.resource, curve.R)
    m += _noise(curve.noise_sigma, req.trial_seed, req.resource)
    metrics = {"map": m, "fps": spec.fps(req.config)}
    return EvaluationResult(metrics, combine_metrics(spec.alpha, metrics))


@dataclass
class Benchmark:
    """A loaded fixture: a space plus a callable ``(config, resource, trial_seed) -> result``."""

    id: str
    tier: str
    space: SearchSpace
    curve: SyntheticCurveSpec
    composite: CompositeSpec | None = None
    optimum: float | None = None
    repetitions: int = 10
    defaults: dict[str, Any] = field(default_factory=dict)

    def __call__(self, config: Configuration, resource: float, trial_seed: int) -> EvaluationResult:
        req = EvaluationRequest(config, resource, trial_seed)
        if self.composite is not None:
            return evaluate_composite_synthetic(self.composite, req)
        return evaluate_synthetic(self.curve, req)

    def with_R(self, R: float) -> Benchmark:
        """Same benchmark with the full-fidelity resource rescaled to ``R``."""
        import dataclasses

        curve = dataclasses.replace(self.curve, R=float(R))
        composite = dataclasses.replace(self.composite, curve=curve) if self.composite else None
        return dataclasses.replace(self, curve=curve, composite=composite)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], space: SearchSpace | None = None) -> Benchmark:
        space = space or SearchSpace.from_list(d["space"])
        norm = d.get("normalization", {})
        curve = SyntheticCurveSpec(
            base_fn=d["base_fn"],
            rate_lo=float(d["rate_lo"]),
            rate_hi=float(d["rate_hi"]),
            noise_sigma=float(d.get("noise_sigma", 0.0)),
            R=float(d.get("R", 1.0)),
            space=space,
            f_min=float(norm.get("min", 0.0)),
            f_max=float(norm.get("max", 1.0)),
        )
        composite = None
        if "composite" in d:
            c = d["composite"]
            composite = CompositeSpec(
                curve=curve,
                alpha=float(c["alpha"]),
                filters=tuple(int(v) for v in c["filters"]),
                sensitivity=tuple(float(v) for v in c["sensitivity"]),
                sharpness=float(c["sharpness"]),
                map_max=float(c["map_max"]),
                fps_scale=float(c["fps_scale"]),
                fps_offset=float(c["fps_offset"]),
            )
        elif curve.base_fn == "composite":
            raise ValueError(f"{d['id']}: base_fn 'composite' needs a composite section")
        if composite is None and len(space) != 2:
            raise ValueError(f"{d['id']}: {curve.base_fn} needs a 2-parameter space, got {len(space)}")
        return cls(
            id=str(d["id"]),
            tier=str(d.get("tier", d["id"])),
            space=space,
            curve=curve,
            composite=composite,
            optimum=d.get("optimum"),
            repetitions=int(d.get("repetitions", 10)),
            defaults=dict(d.get("defaults", {})),
        )


FIXTURE_ENV = "HYPERTPE_FIXTURES"


class BenchmarkNotFound(LookupError):
    pass


def fixture_root(root: str | os.PathLike | None = None) -> Path:
    return Path(root if root is not None else os.environ.get(FIXTURE_ENV, "fixtures"))


def load_benchmark(benchmark_id: str, root: str | os.PathLike | None = None,
                   space: SearchSpace | None = None) -> Benchmark:
    """Load ``<root>/<id>.yaml``; ids are case-insensitive."""
    base = fixture_root(root)
    path = base / f"{str(benchmark_id).lower()}.yaml"
    if not path.is_file():
        raise BenchmarkNotFound(f"benchmark {benchmark_id!r} not found under {base}")
    with open(path, encoding="utf-8") as fh:
        return Benchmark.from_dict(yaml.safe_load(fh), space=space)

"""Tree-structured Parzen estimator.

Observations are split at the ``gamma`` quantile of objective into a good
set and a bad set. Each set gets an independent per-dimension density in unit
coordinates, ``l`` for good and ``g`` for bad. Candidates drawn from ``l`` are
ranked by ``log l(x) - log g(x)``; maximising that ratio is how TPE maximises
expected improvement. Objectives are maximised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from . import _kernels
from .space import (
    CATEGORICAL,
    Configuration,
    SearchSpace,
    from_unit,
    sample_prior,
    to_unit,
)


class EmptyHistory(ValueError):
    pass


@dataclass(frozen=True)
class Observation:
    config: Configuration
    objective: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.objective):
            raise ValueError(f"objective must be finite, got {self.objective!r}")


@dataclass(frozen=True)
class BestIncumbent:
    config: Configuration
    objective: float
    index: int


@dataclass(frozen=True)
class TpeParams:
    """Surrogate knobs.

    ``bandwidth_floor=None`` means the adaptive floor ``1 / min(100, 1 + n)``
    with ``n`` the number of points behind the density. ``n_startup`` may be
    ``math.inf`` to disable the surrogate entirely.
    """

    gamma: float = 0.25
    n_candidates: int = 24
    prior_weight: float = 1.0
    bandwidth_floor: float | None = None
    n_startup: float = 5

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if int(self.n_candidates) != self.n_candidates or self.n_candidates < 1:
            raise ValueError(f"n_candidates must be a positive integer, got {self.n_candidates}")
        if not self.prior_weight >= 0.0:
            raise ValueError(f"prior_weight must be >= 0, got {self.prior_weight}")
        if self.bandwidth_floor is not None and not self.bandwidth_floor > 0.0:
            raise ValueError(f"bandwidth_floor must be > 0, got {self.bandwidth_floor}")
        if not self.n_startup >= 0:
            raise ValueError(f"n_startup must be >= 0, got {self.n_startup}")

    def floor_for(self, n: int) -> float:
        if self.bandwidth_floor is not None:
            return self.bandwidth_floor
        return 1.0 / min(100, 1 + n)

    @classmethod
    def from_dict(cls, d: dict[str, Any] | None) -> TpeParams:
        d = dict(d or {})
        unknown = set(d) - {"gamma", "n_candidates", "prior_weight", "bandwidth_floor", "n_startup"}
        if unknown:
            raise ValueError(f"unknown tpe parameters: {sorted(unknown)}")
        if isinstance(d.get("n_startup"), str) and d["n_startup"].lower() in ("inf", "infinity"):
            d["n_startup"] = math.inf
        return cls(**d)


class NumericDensity:
    """Mixture of Gaussians truncated to [0, 1]."""

    def __init__(self, centers: np.ndarray, sigmas: np.ndarray, weights: np.ndarray):
        self.centers = np.asarray(centers, dtype=np.float64)
        self.sigmas = np.asarray(sigmas, dtype=np.float64)
        self.weights = np.asarray(weights, dtype=np.float64)

    def logpdf(self, u: np.ndarray) -> np.ndarray:
        return _kernels.mixture_logpdf(np.asarray(u, dtype=np.float64), self.centers, self.sigmas, self.weights)

    def pdf(self, u: np.ndarray) -> np.ndarray:
        return np.exp(self.logpdf(u))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.choice(len(self.centers), size=size, p=self.weights)
        u = rng.random(size)
        return _kernels.truncnorm_sample(self.centers[idx], self.sigmas[idx], u)


class CategoricalDensity:
    """Smoothed choice frequencies; unit coordinate ``(j + 0.5) / k`` encodes choice ``j``."""

    def __init__(self, probs: np.ndarray):
        self.probs = np.asarray(probs, dtype=np.float64)

    def _index(self, u: np.ndarray) -> np.ndarray:
        k = len(self.probs)
        return np.minimum((np.asarray(u) * k).astype(np.int64), k - 1)

    def logpdf(self, u: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.probs[self._index(u)])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.choice(len(self.probs), size=size, p=self.probs)
        return (idx + 0.5) / len(self.probs)


@dataclass
class ParzenEstimator:
    space: SearchSpace
    dims: list[NumericDensity | CategoricalDensity]
    n_points: int

    def log_density_unit(self, units: np.ndarray) -> np.ndarray:
        units = np.atleast_2d(np.asarray(units, dtype=np.float64))
        total = np.zeros(units.shape[0])
        for j, dim in enumerate(self.dims):
            total += dim.logpdf(units[:, j])
        return total

    def sample_unit(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.column_stack([dim.sample(rng, size) for dim in self.dims])


def _adaptive_sigmas(coords: np.ndarray, floor: float) -> np.ndarray:
    # gaps are measured among the point centers and the prior center at 0.5
    allc = np.append(coords, 0.5)
    order = np.argsort(allc, kind="stable")
    srt = allc[order]
    gaps = np.diff(srt)
    left = np.concatenate(([0.0], gaps))
    right = np.concatenate((gaps, [0.0]))
    widest = np.empty_like(allc)
    widest[order] = np.maximum(left, right)
    return np.maximum(widest[:-1], floor)


def fit_parzen(points: Sequence[Configuration], space: SearchSpace, params: TpeParams) -> ParzenEstimator:
    n = len(points)
    units = np.array([to_unit(space, c) for c in points]).reshape(n, len(space))
    pw = params.prior_weight
    dims: list[NumericDensity | CategoricalDensity] = []
    for j, spec in enumerate(space.params):
        if spec.kind == CATEGORICAL:
            k = len(spec.choices)
            if n == 0:
                dims.append(CategoricalDensity(np.full(k, 1.0 / k)))
                continue
            counts = np.bincount(np.minimum((units[:, j] * k).astype(np.int64), k - 1), minlength=k)
            dims.append(CategoricalDensity((counts + pw) / (n + pw * k)))
            continue
        if n == 0:
            dims.append(NumericDensity(np.array([0.5]), np.array([1.0]), np.array([1.0])))
            continue
        coords = units[:, j]
        sigmas = _adaptive_sigmas(coords, params.floor_for(n))
        weights = np.append(np.full(n, 1.0), pw) / (n + pw)
        dims.append(NumericDensity(np.append(coords, 0.5), np.append(sigmas, 1.0), weights))
    return ParzenEstimator(space, dims, n)


def log_density(est: ParzenEstimator, config: Configuration) -> float:
    return float(est.log_density_unit(to_unit(est.space, config)[None, :])[0])


def split_observations(history: Sequence[Observation], params: TpeParams) -> tuple[list[Observation], list[Observation]]:
    if not history:
        raise EmptyHistory("cannot split an empty history")
    t = len(history)
    n_good = max(1, int(math.floor(params.gamma * t)))
    # stable sort: equal objectives keep insertion order, earlier ones land in good
    order = sorted(range(t), key=lambda i: -history[i].objective)
    good_idx = set(order[:n_good])
    good = [history[i] for i in order[:n_good]]
    bad = [history[i] for i in range(t) if i not in good_idx]
    return good, bad


def fit_good_bad(history: Sequence[Observation], space: SearchSpace, params: TpeParams):
    good, bad = split_observations(history, params)
    l_est = fit_parzen([o.config for o in good], space, params)
    g_est = fit_parzen([o.config for o in bad], space, params)
    return l_est, g_est


def acquisition(l_est: ParzenEstimator, g_est: ParzenEstimator, units: np.ndarray) -> np.ndarray:
    """``log l - log g`` at each row of ``units``."""
    with np.errstate(invalid="ignore"):
        score = l_est.log_density_unit(units) - g_est.log_density_unit(units)
    return np.where(np.isnan(score), -np.inf, score)


def suggest(
    history: Sequence[Observation],
    space: SearchSpace,
    params: TpeParams,
    rng: np.random.Generator,
) -> Configuration:
    if len(history) < params.n_startup:
        return sample_prior(space, rng)
    l_est, g_est = fit_good_bad(history, space, params)
    raw = l_est.sample_unit(rng, int(params.n_candidates))
    candidates = [from_unit(space, row) for row in raw]
    # score the snapped configurations, not the raw draws
    units = np.array([to_unit(space, c) for c in candidates])
    best = int(np.argmax(acquisition(l_est, g_est, units)))
    return candidates[best]


def incumbent(history: Sequence[Observation]) -> BestIncumbent:
    if not history:
        raise EmptyHistory("no observations yet")
    best = 0
    for i, obs in enumerate(history):
        if obs.objective > history[best].objective:
            best = i
    return BestIncumbent(history[best].config, history[best].objective, best)

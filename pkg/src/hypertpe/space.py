"""Hyperparameter search spaces.

A :class:`SearchSpace` is an ordered list of :class:`ParameterSpec`. Concrete
points are plain ``dict`` objects mapping parameter name to value. Every space
has a bijection onto the unit hypercube that the Parzen surrogate works in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

Configuration = dict[str, Any]

UNIFORM = "uniform"
LOG_UNIFORM = "log-uniform"
INTEGER = "integer"
CATEGORICAL = "categorical"
KINDS = (UNIFORM, LOG_UNIFORM, INTEGER, CATEGORICAL)


class SpaceError(ValueError):
    """Raised for malformed parameter or space definitions."""


class InvalidConfiguration(ValueError):
    """Raised when a configuration does not validate against its space."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    kind: str
    low: float | None = None
    high: float | None = None
    choices: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.name or not isinstance(self.name, str):
            raise SpaceError(f"parameter name must be a non-empty string, got {self.name!r}")
        if self.kind not in KINDS:
            raise SpaceError(f"{self.name}: unknown kind {self.kind!r}, expected one of {KINDS}")
        if self.kind == CATEGORICAL:
            choices = tuple(self.choices)
            object.__setattr__(self, "choices", choices)
            if len(choices) < 1:
                raise SpaceError(f"{self.name}: categorical needs at least one choice")
            if len(set(choices)) != len(choices):
                raise SpaceError(f"{self.name}: categorical choices must be unique")
            return
        if self.low is None or self.high is None:
            raise SpaceError(f"{self.name}: numeric kinds need low and high")
        low, high = float(self.low), float(self.high)
        if not (math.isfinite(low) and math.isfinite(high)):
            raise SpaceError(f"{self.name}: bounds must be finite")
        if not low < high:
            raise SpaceError(f"{self.name}: need low < high, got ({low}, {high})")
        if self.kind == LOG_UNIFORM and low <= 0:
            raise SpaceError(f"{self.name}: log-uniform needs low > 0, got {low}")
        if self.kind == INTEGER:
            if low != int(low) or high != int(high):
                raise SpaceError(f"{self.name}: integer bounds must be whole numbers")
            low, high = int(low), int(high)
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @property
    def is_numeric(self) -> bool:
        return self.kind != CATEGORICAL

    # The surrogate works on these bounds. Integers are widened by half a step
    # on both sides so that every integer owns an equal share of [0, 1].
    def _relaxed_bounds(self) -> tuple[float, float]:
        if self.kind == LOG_UNIFORM:
            return math.log(self.low), math.log(self.high)
        if self.kind == INTEGER:
            return self.low - 0.5, self.high + 0.5
        return float(self.low), float(self.high)

    def check(self, value: Any) -> str | None:
        """Return a violation message for ``value`` or ``None`` when it is valid."""
        if self.kind == CATEGORICAL:
            if value not in self.choices:
                return f"{self.name}: {value!r} is not one of {list(self.choices)}"
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
            return f"{self.name}: expected a number, got {value!r}"
        if not math.isfinite(value):
            return f"{self.name}: value {value!r} is not finite"
        if self.kind == INTEGER and value != int(value):
            return f"{self.name}: {value!r} is not an integer"
        if not self.low <= value <= self.high:
            return f"{self.name}: {value!r} outside [{self.low}, {self.high}]"
        return None

    def sample(self, rng: np.random.Generator) -> Any:
        if self.kind == CATEGORICAL:
            return self.choices[int(rng.integers(len(self.choices)))]
        if self.kind == INTEGER:
            return int(rng.integers(self.low, self.high + 1))
        if self.kind == LOG_UNIFORM:
            value = math.exp(rng.uniform(math.log(self.low), math.log(self.high)))
            return min(max(value, self.low), self.high)
        return float(rng.uniform(self.low, self.high))

    def to_unit(self, value: Any) -> float:
        if self.kind == CATEGORICAL:
            return (self.choices.index(value) + 0.5) / len(self.choices)
        lo, hi = self._relaxed_bounds()
        v = math.log(value) if self.kind == LOG_UNIFORM else float(value)
        return (v - lo) / (hi - lo)

    def from_unit(self, u: float) -> Any:
        u = min(max(float(u), 0.0), 1.0)
        if self.kind == CATEGORICAL:
            k = len(self.choices)
            return self.choices[min(int(math.floor(u * k)), k - 1)]
        lo, hi = self._relaxed_bounds()
        v = lo + u * (hi - lo)
        if self.kind == INTEGER:
            # half-up rounding on the relaxed axis
            return int(min(max(math.floor(v + 0.5), self.low), self.high))
        if self.kind == LOG_UNIFORM:
            return min(max(math.exp(v), self.low), self.high)
        return min(max(v, self.low), self.high)

    def to_dict(self) -> dict[str, Any]:
        if self.kind == CATEGORICAL:
            return {"name": self.name, "kind": self.kind, "choices": list(self.choices)}
        return {"name": self.name, "kind": self.kind, "low": self.low, "high": self.high}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ParameterSpec:
        if not isinstance(d, Mapping):
            raise SpaceError(f"parameter entry must be a mapping, got {d!r}")
        unknown = set(d) - {"name", "kind", "low", "high", "choices"}
        if unknown:
            raise SpaceError(f"{d.get('name', '?')}: unknown keys {sorted(unknown)}")
        kind = d.get("kind")
        if kind == CATEGORICAL:
            choices = d.get("choices")
            if not isinstance(choices, (list, tuple)):
                raise SpaceError(f"{d.get('name', '?')}: categorical needs a 'choices' list")
            return cls(name=d.get("name"), kind=kind, choices=tuple(choices))

        def num(key: str) -> float | None:
            if key not in d:
                return None
            try:
                # PyYAML reads "1e-4" as a string
                return float(d[key])
            except (TypeError, ValueError):
                raise SpaceError(f"{d.get('name', '?')}: {key} must be a number, got {d[key]!r}")

        return cls(name=d.get("name"), kind=kind, low=num("low"), high=num("high"))


@dataclass(frozen=True)
class SearchSpace:
    params: tuple[ParameterSpec, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        params = tuple(self.params)
        object.__setattr__(self, "params", params)
        names = [p.name for p in params]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SpaceError(f"duplicate parameter names: {dupes}")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    def __len__(self) -> int:
        return len(self.params)

    def __iter__(self):
        return iter(self.params)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    def __getitem__(self, name: str) -> ParameterSpec:
        return self.params[self._index[name]]

    def to_list(self) -> list[dict[str, Any]]:
        return [p.to_dict() for p in self.params]

    @classmethod
    def from_list(cls, entries: Sequence[Mapping[str, Any]]) -> SearchSpace:
        if not isinstance(entries, (list, tuple)) or not entries:
            raise SpaceError("space must be a non-empty list of parameters")
        return cls(tuple(ParameterSpec.from_dict(e) for e in entries))


def sample_prior(space: SearchSpace, rng: np.random.Generator) -> Configuration:
    """Draw one configuration from the uniform / log-uniform prior."""
    return {p.name: p.sample(rng) for p in space.params}


def validate(space: SearchSpace, config: Mapping[str, Any]) -> list[str]:
    """List every violation of ``config`` against ``space``; empty means valid."""
    problems = []
    for p in space.params:
        if p.name not in config:
            problems.append(f"{p.name}: missing")
            continue
        msg = p.check(config[p.name])
        if msg:
            problems.append(msg)
    for name in config:
        if name not in space._index:
            problems.append(f"{name}: not a parameter of this space")
    return problems


def to_unit(space: SearchSpace, config: Mapping[str, Any]) -> np.ndarray:
    problems = validate(space, config)
    if problems:
        raise InvalidConfiguration(problems)
    return np.array([p.to_unit(config[p.name]) for p in space.params], dtype=np.float64)


def from_unit(space: SearchSpace, u: Sequence[float]) -> Configuration:
    if len(u) != len(space):
        raise ValueError(f"expected {len(space)} coordinates, got {len(u)}")
    return {p.name: p.from_unit(x) for p, x in zip(space.params, u)}

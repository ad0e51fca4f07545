"""Experiment orchestration, trial logs and best-so-far curves.

A run is one (optimizer, benchmark, seed) triple. Every evaluation is written
to the run's JSON-lines log before the optimizer sees its score, so a log that
stops early is still a valid prefix.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import schedulers
from .objectives import Benchmark, EvaluationResult, load_benchmark
from .schedulers import OPTIMIZERS, OptimizerResult, TrialRecord
from .space import SearchSpace
from .tpe import TpeParams

FLAT_OPTIMIZERS = ("random", "tpe")


class PersistenceError(RuntimeError):
    pass


class EmptyRun(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    optimizer: str
    benchmark: str
    R: float
    eta: float
    seeds: tuple[int, ...]
    total_budget: float | None = None
    tpe_params: TpeParams = field(default_factory=TpeParams)
    cost_model: str = "resume"
    share_history: bool = False
    fixture_root: str | None = None
    space: SearchSpace | None = None

    def __post_init__(self) -> None:
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}, expected one of {OPTIMIZERS}")
        if self.cost_model not in schedulers.COST_MODELS:
            raise ValueError(f"cost_model must be one of {schedulers.COST_MODELS}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        seeds = tuple(int(s) for s in self.seeds)
        if any(s < 0 for s in seeds):
            raise ValueError("seeds must be non-negative integers")
        if len(set(seeds)) != len(seeds):
            raise ValueError("seeds must be distinct")
        object.__setattr__(self, "seeds", seeds)
        # raises InvalidParameters for a bad (R, eta)
        schedulers.compute_brackets(self.R, self.eta)
        if self.total_budget is not None and not self.total_budget >= self.R:
            raise ValueError(f"total_budget {self.total_budget} is below R={self.R}")

    def load_benchmark(self) -> Benchmark:
        return load_benchmark(self.benchmark, self.fixture_root, self.space).with_R(self.R)


@dataclass
class TrialLogEntry:
    run_id: str
    optimizer: str
    benchmark: str
    seed: int
    trial_id: int
    bracket: int | None
    rung: int
    config: dict[str, Any]
    resource: float
    R: float
    full_fidelity: bool
    metrics: dict[str, float] | None
    objective: float | None
    error: str | None
    delta: float
    cumulative: float
    wall_time: float

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), ensure_ascii=False, allow_nan=False)

    @classmethod
    def from_json(cls, line: str) -> TrialLogEntry:
        d = json.loads(line)
        names = [f.name for f in dataclasses.fields(cls)]
        missing = [n for n in names if n not in d]
        if missing:
            raise ValueError(f"log record missing fields {missing}")
        return cls(**{n: d[n] for n in names})


class RunRecorder:
    """Per-run sink that turns scheduler callbacks into log entries."""

    def __init__(self, run_id: str, optimizer: str, benchmark: str, seed: int, R: float,
                 path: Path | None = None):
        self.run_id = run_id
        self.optimizer = optimizer
        self.benchmark = benchmark
        self.seed = seed
        self.R = R
        self.path = path
        self.entries: list[TrialLogEntry] = []
        self._fh = None
        if path is not None:
            try:
                self._fh = open(path, "w", encoding="utf-8")
            except OSError as exc:
                raise PersistenceError(f"cannot open {path}: {exc}") from exc

    def record(self, trial: TrialRecord, rung: int, resource: float,
               result: EvaluationResult | None, delta: float, cumulative: float,
               full_fidelity: bool) -> None:
        entry = TrialLogEntry(
            run_id=self.run_id,
            optimizer=self.optimizer,
            benchmark=self.benchmark,
            seed=self.seed,
            trial_id=trial.trial_id,
            bracket=trial.bracket,
            rung=rung,
            config=dict(trial.config),
            resource=float(resource),
            R=self.R,
            full_fidelity=bool(full_fidelity),
            metrics=dict(result.metrics) if result is not None else None,
            objective=float(result.objective) if result is not None else None,
            error=None if result is not None else (trial.error or "evaluation failed"),
            delta=float(delta),
            cumulative=float(cumulative),
            wall_time=time.time(),
        )
        self.entries.append(entry)
        if self._fh is not None:
            try:
                self._fh.write(entry.to_json() + "\n")
                self._fh.flush()
            except (OSError, ValueError) as exc:
                raise PersistenceError(f"write to {self.path} failed: {exc}") from exc

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


class LogStore:
    """Holds run logs in memory, and also on disk when given a directory."""

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self.runs: dict[str, list[TrialLogEntry]] = {}

    def open_run(self, run_id: str, optimizer: str, benchmark: str, seed: int, R: float) -> RunRecorder:
        path = self.directory / f"{run_id}.jsonl" if self.directory is not None else None
        rec = RunRecorder(run_id, optimizer, benchmark, seed, R, path)
        self.runs[run_id] = rec.entries
        return rec


def run_id_for(optimizer: str, benchmark: str, seed: int) -> str:
    return f"{benchmark.lower()}-{optimizer}-seed{seed}"


_BUDGET_CACHE: dict[tuple, float] = {}


def hyperband_budget(config: RunConfig, seed: int, bench: Benchmark | None = None) -> float:
    """Ledger total of a Hyperband run at the same (R, eta, benchmark, seed)."""
    key = (config.benchmark.lower(), config.fixture_root, config.R, config.eta, seed,
           config.cost_model, config.space)
    if key not in _BUDGET_CACHE:
        bench = bench or config.load_benchmark()
        hb = schedulers.run_hyperband(bench.space, bench, config.R, config.eta, seed,
                                      cost_model=config.cost_model)
        _BUDGET_CACHE[key] = hb.ledger.consumed
    return _BUDGET_CACHE[key]


def run_seed(config: RunConfig, seed: int, store: LogStore) -> OptimizerResult:
    bench = config.load_benchmark()
    budget = config.total_budget
    if config.optimizer in FLAT_OPTIMIZERS and budget is None:
        budget = hyperband_budget(config, seed, bench)
    rec = store.open_run(run_id_for(config.optimizer, bench.id, seed), config.optimizer,
                         bench.id, seed, config.R)
    try:
        return schedulers.run_optimizer(
            config.optimizer, bench.space, bench, R=config.R, eta=config.eta, seed=seed,
            total_budget=budget, tpe_params=config.tpe_params, store=rec,
            cost_model=config.cost_model, share_history=config.share_history,
        )
    finally:
        rec.close()


def _run_seed_to_dir(args) -> OptimizerResult:
    config, seed, directory = args
    return run_seed(config, seed, LogStore(directory))


def execute(config: RunConfig, store: LogStore, parallel: int = 1) -> list[OptimizerResult]:
    """Run every seed of ``config``; one result per seed, in seed order.

    ``parallel > 1`` runs seeds in worker processes and needs a directory-backed
    store; in-memory entries are then reloaded from the written files.
    """
    if parallel <= 1 or len(config.seeds) == 1:
        return [run_seed(config, seed, store) for seed in config.seeds]
    if store.directory is None:
        raise ValueError("parallel execution needs a directory-backed LogStore")
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        results = list(pool.map(_run_seed_to_dir, [(config, s, store.directory) for s in config.seeds]))
    for res in results:
        rid = run_id_for(config.optimizer, config.benchmark, res.seed)
        store.runs[rid] = read_log(store.directory / f"{rid}.jsonl")[0]
    return results


def read_log(path: str | Path) -> tuple[list[TrialLogEntry], int]:
    """Parse a log file; returns (entries, number of malformed lines skipped)."""
    entries, bad = [], 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                entries.append(TrialLogEntry.from_json(line))
            except (ValueError, TypeError):
                bad += 1
    return entries, bad


def replay_ledger(entries: Sequence[TrialLogEntry]) -> float:
    return math.fsum(e.delta for e in entries)


def incumbent_curve(entries: Sequence[TrialLogEntry]) -> list[tuple[float, float]]:
    """Running best full-fidelity objective against budget in multiples of ``R``."""
    if not entries:
        raise EmptyRun("run has no log entries")
    curve = []
    best = -math.inf
    for e in sorted(entries, key=lambda e: e.cumulative):
        if not e.full_fidelity or e.objective is None:
            continue
        best = max(best, e.objective)
        curve.append((e.cumulative / e.R, best))
    return curve


@dataclass(frozen=True)
class CurvePoint:
    budget: float
    mean_best: float
    stderr: float
    n_runs: int


def value_at(curve: Sequence[tuple[float, float]], budget: float) -> float | None:
    """Last-value-carry-forward lookup; ``None`` before the curve starts."""
    value = None
    for b, v in curve:
        if b > budget:
            break
        value = v
    return value


def aggregate(curves: Sequence[Sequence[tuple[float, float]]]) -> list[CurvePoint]:
    if not curves:
        raise ValueError("aggregate needs at least one curve")
    grid = sorted({b for c in curves for b, _ in c})
    points = []
    for b in grid:
        vals = [v for v in (value_at(c, b) for c in curves) if v is not None]
        if not vals:
            continue
        arr = np.asarray(vals, dtype=np.float64)
        stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
        points.append(CurvePoint(b, float(arr.mean()), stderr, len(arr)))
    return points


REPORT_HEADER = ("budget", "optimizer", "mean_best", "stderr", "n_runs")


def report_rows(runs: Iterable[Sequence[TrialLogEntry]]) -> list[tuple]:
    """Aggregate runs per optimizer into report rows, optimizers in first-seen order."""
    by_opt: dict[str, list] = {}
    for entries in runs:
        if not entries:
            continue
        curve = incumbent_curve(entries)
        if curve:
            by_opt.setdefault(entries[0].optimizer, []).append(curve)
    rows = []
    for opt, curves in by_opt.items():
        for p in aggregate(curves):
            rows.append((p.budget, opt, p.mean_best, p.stderr, p.n_runs))
    return rows


def final_best(entries: Sequence[TrialLogEntry], budget: float | None = None) -> float | None:
    curve = incumbent_curve(entries)
    if budget is None:
        return curve[-1][1] if curve else None
    return value_at(curve, budget)

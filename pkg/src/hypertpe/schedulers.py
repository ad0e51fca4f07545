"""Optimizer drivers: random search, TPE, Hyperband and Hyperband with TPE sampling.

All four share the same bookkeeping. Every evaluation is charged to a
:class:`BudgetLedger`, recorded on its :class:`TrialRecord` and handed to the
store before the optimizer looks at the score.

Resources are reals in the units of ``R``. Under the default ``"resume"`` cost
model a trial promoted from ``r_{i-1}`` to ``r_i`` is charged only the
increment; ``"retrain"`` charges the full ``r_i`` again.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Protocol, Sequence

import numpy as np

from . import tpe
from .objectives import EvaluationResult
from .space import Configuration, SearchSpace, sample_prior

Objective = Callable[[Configuration, float, int], EvaluationResult]

RUNNING = "running"
PROMOTED = "promoted"
ELIMINATED = "eliminated"
COMPLETED = "completed"

COST_MODELS = ("resume", "retrain")


class InvalidParameters(ValueError):
    pass


@dataclass(frozen=True)
class Rung:
    n: int
    r: float
    keep: int
    r_exact: Fraction = field(default=Fraction(0), repr=False, compare=False)


@dataclass(frozen=True)
class BracketPlan:
    s: int
    n: int
    r0: float
    rungs: tuple[Rung, ...]


def _floor_log(R: float, eta: float) -> int:
    # exact: largest s with eta**s <= R
    R_, eta_ = Fraction(R), Fraction(eta)
    s = 0
    power = eta_
    while power <= R_:
        s += 1
        power *= eta_
    return s


def compute_brackets(R: float, eta: float) -> list[BracketPlan]:
    """Hyperband's bracket ladder, largest ``s`` first.

    ``keep`` already applies the zero-keep rule: at least one trial survives a
    non-final rung and exactly one leaves the final rung.
    """
    if not (isinstance(R, (int, float)) and math.isfinite(R) and R >= 1):
        raise InvalidParameters(f"R must be a finite number >= 1, got {R!r}")
    if not (isinstance(eta, (int, float)) and math.isfinite(eta) and eta > 1):
        raise InvalidParameters(f"eta must be a finite number > 1, got {eta!r}")
    s_max = _floor_log(R, eta)
    # eta = p / q exactly, so every ceil and floor below is integer division
    p, q = Fraction(eta).as_integer_ratio()
    plans = []
    for s in range(s_max, -1, -1):
        n = -(-(s_max + 1) * p**s // (q**s * (s + 1)))
        rungs = []
        for i in range(s + 1):
            n_i = n * q**i // p**i
            keep = 1 if i == s else max(1, n_i * q // p)
            r_exact = Fraction(R) * q ** (s - i) / p ** (s - i)
            rungs.append(Rung(n=n_i, r=float(r_exact), keep=keep, r_exact=r_exact))
        plans.append(BracketPlan(s=s, n=n, r0=rungs[0].r, rungs=tuple(rungs)))
    return plans


@dataclass
class TrialRecord:
    trial_id: int
    config: Configuration
    optimizer: str
    bracket: int | None = None
    rung_results: list[tuple[int, float, float]] = field(default_factory=list)
    status: str = RUNNING
    error: str | None = None
    consumed_exact: Fraction = Fraction(0)
    last_exact: Fraction = Fraction(0)

    @property
    def resources_consumed(self) -> float:
        return float(self.consumed_exact)

    @property
    def last_resource(self) -> float:
        return self.rung_results[-1][1] if self.rung_results else 0.0


@dataclass
class BudgetLedger:
    """Total resource charged so far; summed exactly, reported as float."""

    events: list[tuple[int, float]] = field(default_factory=list)
    exact: Fraction = Fraction(0)

    @property
    def consumed(self) -> float:
        return float(self.exact)

    def charge(self, trial_id: int, delta: Fraction | float) -> Fraction:
        delta = Fraction(delta)
        if delta < 0:
            raise ValueError(f"negative charge {float(delta)} for trial {trial_id}")
        self.events.append((trial_id, float(delta)))
        self.exact += delta
        return delta


@dataclass(frozen=True)
class BestEvaluation:
    trial_id: int
    config: Configuration
    objective: float
    resource: float


@dataclass
class OptimizerResult:
    optimizer: str
    seed: int
    R: float
    best: BestEvaluation | None
    best_any_fidelity: BestEvaluation | None
    curve: list[tuple[float, float]]
    trials: list[TrialRecord]
    ledger: BudgetLedger
    # granted budget for flat optimizers; whole trials only, so consumption may fall short by < R
    total_budget: float | None = None


class TrialStore(Protocol):
    def record(self, trial: TrialRecord, rung: int, resource: float,
               result: EvaluationResult | None, delta: float, cumulative: float,
               full_fidelity: bool) -> None: ...


class NullStore:
    def record(self, *args, **kwargs) -> None:
        pass


def trial_seed(seed: int, trial_id: int) -> int:
    return int(np.random.SeedSequence([seed, trial_id]).generate_state(1, np.uint64)[0])


def top_k(trials: Sequence[TrialRecord], objs: Sequence[float], k: int) -> list[TrialRecord]:
    """The ``k`` highest-scoring trials; ties go to the lower ``trial_id``."""
    if len(trials) != len(objs):
        raise ValueError(f"length mismatch: {len(trials)} trials, {len(objs)} objectives")
    if not 0 <= k <= len(trials):
        raise ValueError(f"k={k} outside [0, {len(trials)}]")
    order = sorted(range(len(trials)), key=lambda i: (-objs[i], trials[i].trial_id))
    return [trials[i] for i in order[:k]]


class _Run:
    """Mutable state shared by one optimizer run."""

    def __init__(self, name, space, objective, R, seed, ledger, store, cost_model):
        if cost_model not in COST_MODELS:
            raise InvalidParameters(f"cost_model must be one of {COST_MODELS}, got {cost_model!r}")
        self.name = name
        self.space = space
        self.objective = objective
        self.R = float(R)
        self.seed = int(seed)
        self.ledger = ledger if ledger is not None else BudgetLedger()
        self.store = store if store is not None else NullStore()
        self.cost_model = cost_model
        self.rng = np.random.default_rng(self.seed)
        self.trials: list[TrialRecord] = []
        self.best: BestEvaluation | None = None
        self.best_any: BestEvaluation | None = None
        self.curve: list[tuple[float, float]] = []

    def new_trial(self, config: Configuration, bracket: int | None = None) -> TrialRecord:
        trial = TrialRecord(len(self.trials), dict(config), self.name, bracket)
        self.trials.append(trial)
        return trial

    def evaluate(self, trial: TrialRecord, rung: int, exact: Fraction, full: bool) -> float | None:
        """Run one evaluation at resource ``exact``; ``None`` means it failed."""
        resource = float(exact)
        delta = exact - trial.last_exact if self.cost_model == "resume" else exact
        result, error = None, None
        try:
            result = self.objective(trial.config, resource, trial_seed(self.seed, trial.trial_id))
            if not math.isfinite(result.objective):
                raise ValueError(f"non-finite objective {result.objective!r}")
        except Exception as exc:  # noqa: BLE001 - any objective failure eliminates the trial
            result, error = None, f"{type(exc).__name__}: {exc}"
        self.ledger.charge(trial.trial_id, delta)
        trial.consumed_exact += delta
        if result is None:
            trial.status = ELIMINATED
            trial.error = error
        self.store.record(trial, rung, resource, result, float(delta), self.ledger.consumed, full)
        if result is None:
            return None
        value = float(result.objective)
        trial.last_exact = exact
        trial.rung_results.append((rung, resource, value))
        here = BestEvaluation(trial.trial_id, trial.config, value, resource)
        if self.best_any is None or value > self.best_any.objective:
            self.best_any = here
        if full:
            trial.status = COMPLETED
            if self.best is None or value > self.best.objective:
                self.best = here
            self.curve.append((self.ledger.consumed / self.R, self.best.objective))
        return value

    def result(self) -> OptimizerResult:
        return OptimizerResult(
            optimizer=self.name,
            seed=self.seed,
            R=self.R,
            best=self.best if self.best is not None else self.best_any,
            best_any_fidelity=self.best_any,
            curve=list(self.curve),
            trials=self.trials,
            ledger=self.ledger,
        )


def _flat(run: _Run, total_budget: float, propose: Callable[[list[tpe.Observation]], Configuration]) -> OptimizerResult:
    if not total_budget >= run.R:
        raise InvalidParameters(f"total_budget {total_budget} is below R={run.R}")
    n_trials = int(math.floor(total_budget / run.R + 1e-9))
    history: list[tpe.Observation] = []
    for _ in range(n_trials):
        trial = run.new_trial(propose(history))
        value = run.evaluate(trial, 0, Fraction(run.R), full=True)
        if value is not None:
            history.append(tpe.Observation(trial.config, value))
    res = run.result()
    res.total_budget = float(total_budget)
    return res


def run_random(space: SearchSpace, objective: Objective, R: float, total_budget: float, seed: int,
               ledger: BudgetLedger | None = None, store: TrialStore | None = None,
               cost_model: str = "resume") -> OptimizerResult:
    run = _Run("random", space, objective, R, seed, ledger, store, cost_model)
    return _flat(run, total_budget, lambda history: sample_prior(space, run.rng))


def run_bo(space: SearchSpace, objective: Objective, R: float, total_budget: float,
           tpe_params: tpe.TpeParams | None, seed: int, ledger: BudgetLedger | None = None,
           store: TrialStore | None = None, cost_model: str = "resume") -> OptimizerResult:
    """Sequential TPE, every trial trained at full fidelity ``R``."""
    params = tpe_params or tpe.TpeParams()
    run = _Run("tpe", space, objective, R, seed, ledger, store, cost_model)
    return _flat(run, total_budget, lambda history: tpe.suggest(history, space, params, run.rng))


def _hyperband(run: _Run, eta: float, sample_rung0: Callable[[BracketPlan], list[TrialRecord]]) -> OptimizerResult:
    for plan in compute_brackets(run.R, eta):
        survivors = sample_rung0(plan)
        for i, rung in enumerate(plan.rungs):
            final = i == plan.s
            scored, objs = [], []
            for trial in survivors:
                value = trial.rung_results[-1][2] if i == 0 else run.evaluate(trial, i, rung.r_exact, final)
                if value is not None:
                    scored.append(trial)
                    objs.append(value)
            if final:
                break
            kept = top_k(scored, objs, min(rung.keep, len(scored)))
            kept_ids = {t.trial_id for t in kept}
            for trial in scored:
                trial.status = PROMOTED if trial.trial_id in kept_ids else ELIMINATED
            survivors = kept
    return run.result()


def run_hyperband(space: SearchSpace, objective: Objective, R: float, eta: float, seed: int,
                  ledger: BudgetLedger | None = None, store: TrialStore | None = None,
                  cost_model: str = "resume") -> OptimizerResult:
    run = _Run("hyperband", space, objective, R, seed, ledger, store, cost_model)

    def rung0(plan: BracketPlan) -> list[TrialRecord]:
        trials = [run.new_trial(sample_prior(space, run.rng), plan.s) for _ in range(plan.n)]
        final = plan.s == 0
        r0 = plan.rungs[0].r_exact
        return [t for t in trials if run.evaluate(t, 0, r0, final) is not None]

    return _hyperband(run, eta, rung0)


def run_hyperband_tpe(space: SearchSpace, objective: Objective, R: float, eta: float,
                      tpe_params: tpe.TpeParams | None, seed: int, ledger: BudgetLedger | None = None,
                      store: TrialStore | None = None, cost_model: str = "resume",
                      share_history: bool = False) -> OptimizerResult:
    """Hyperband whose first rung is filled one trial at a time by TPE.

    The observation set is local to a bracket unless ``share_history`` is set,
    in which case first-rung scores from every bracket so far are pooled even
    though they were measured at different resources.
    """
    params = tpe_params or tpe.TpeParams()
    run = _Run("hyperband_tpe", space, objective, R, seed, ledger, store, cost_model)
    shared: list[tpe.Observation] = []

    def rung0(plan: BracketPlan) -> list[TrialRecord]:
        history = shared if share_history else []
        final = plan.s == 0
        trials = []
        for _ in range(plan.rungs[0].n):
            trial = run.new_trial(tpe.suggest(history, space, params, run.rng), plan.s)
            value = run.evaluate(trial, 0, plan.rungs[0].r_exact, final)
            if value is not None:
                history.append(tpe.Observation(trial.config, value))
                trials.append(trial)
        return trials

    return _hyperband(run, eta, rung0)


OPTIMIZERS = ("random", "tpe", "hyperband", "hyperband_tpe")


def run_optimizer(name: str, space: SearchSpace, objective: Objective, *, R: float, eta: float,
                  seed: int, total_budget: float | None = None,
                  tpe_params: tpe.TpeParams | None = None, ledger: BudgetLedger | None = None,
                  store: TrialStore | None = None, cost_model: str = "resume",
                  share_history: bool = False) -> OptimizerResult:
    """Dispatch by optimizer name; flat optimizers need ``total_budget``."""
    if name == "hyperband":
        return run_hyperband(space, objective, R, eta, seed, ledger, store, cost_model)
    if name == "hyperband_tpe":
        return run_hyperband_tpe(space, objective, R, eta, tpe_params, seed, ledger, store,
                                 cost_model, share_history)
    if total_budget is None:
        raise InvalidParameters(f"{name} needs a total_budget")
    if name == "random":
        return run_random(space, objective, R, total_budget, seed, ledger, store, cost_model)
    if name == "tpe":
        return run_bo(space, objective, R, total_budget, tpe_params, seed, ledger, store, cost_model)
    raise InvalidParameters(f"unknown optimizer {name!r}, expected one of {OPTIMIZERS}")


def describe_brackets(plans: Sequence[BracketPlan]) -> list[dict[str, Any]]:
    return [
        {"s": p.s, "n": p.n, "r0": p.r0, "rungs": [(r.n, r.r, r.keep) for r in p.rungs]}
        for p in plans
    ]

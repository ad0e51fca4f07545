"""Command line entry point.

    hypertpe run EXPERIMENT.yaml [--out DIR] [--seeds 0,1,2] [--parallel N]
    hypertpe report LOG_DIR [--out report.csv]
    hypertpe validate EXPERIMENT.yaml

Exit codes: 0 success, 1 the experiment file, fixtures or inputs are invalid
(the message names the line or field), 2 a run failed while executing.
The fixture directory is ``$HYPERTPE_FIXTURES``, default ``./fixtures``.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import yaml

from . import harness, schedulers
from .objectives import BenchmarkNotFound, load_benchmark
from .schedulers import OPTIMIZERS
from .space import SearchSpace, SpaceError
from .tpe import TpeParams

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_EXECUTION = 2

_KEYS = {"benchmark", "optimizers", "R", "eta", "seeds", "total_budget", "cost_model",
         "share_history", "tpe", "space", "output", "name"}


class ExperimentError(ValueError):
    pass


@dataclass
class ExperimentFile:
    path: Path
    benchmark: str
    optimizers: list[str]
    R: float
    eta: float
    seeds: list[int]
    total_budget: float | None = None
    cost_model: str = "resume"
    share_history: bool = False
    tpe: TpeParams = field(default_factory=TpeParams)
    space: SearchSpace | None = None
    output_dir: str | None = None
    report_path: str | None = None

    def run_configs(self) -> list[harness.RunConfig]:
        """One :class:`RunConfig` per (optimizer, seed) pair."""
        return [
            harness.RunConfig(
                optimizer=opt, benchmark=self.benchmark, R=self.R, eta=self.eta, seeds=(seed,),
                total_budget=self.total_budget, tpe_params=self.tpe, cost_model=self.cost_model,
                share_history=self.share_history, space=self.space,
            )
            for opt in self.optimizers
            for seed in self.seeds
        ]


def _key_lines(text: str) -> dict[str, int]:
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {k.value: k.start_mark.line + 1 for k, _ in node.value if isinstance(k, yaml.ScalarNode)}


def parse_experiment(path: str | Path, seeds: Sequence[int] | None = None) -> ExperimentFile:
    """Read and check an experiment file; raises ExperimentError naming the line and field."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ExperimentError(f"{path}: cannot read: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark else str(path)
        raise ExperimentError(f"{where}: YAML syntax error: {getattr(exc, 'problem', exc)}") from exc
    if not isinstance(doc, dict):
        raise ExperimentError(f"{path}: top level must be a mapping")
    lines = _key_lines(text)

    def fail(key: str, msg: str):
        line = lines.get(key)
        where = f"{path}:{line}" if line else str(path)
        raise ExperimentError(f"{where}: {key}: {msg}")

    unknown = sorted(set(doc) - _KEYS)
    if unknown:
        fail(unknown[0], f"unknown field (allowed: {sorted(_KEYS)})")
    for key in ("benchmark", "optimizers", "R", "eta", "seeds"):
        if key not in doc:
            raise ExperimentError(f"{path}: missing required field '{key}'")

    def number(key: str) -> float:
        v = doc[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            fail(key, f"must be a finite number, got {v!r}")
        return float(v)

    R, eta = number("R"), number("eta")
    if R < 1:
        fail("R", f"must be >= 1, got {R}")
    if eta <= 1:
        fail("eta", f"must be > 1, got {eta}")

    opts = doc["optimizers"]
    if isinstance(opts, str):
        opts = [opts]
    if not isinstance(opts, list) or not opts:
        fail("optimizers", "must be a non-empty list")
    for o in opts:
        if o not in OPTIMIZERS:
            fail("optimizers", f"unknown optimizer {o!r}, expected one of {list(OPTIMIZERS)}")
    if len(set(opts)) != len(opts):
        fail("optimizers", "duplicate optimizer")

    if seeds is None:
        seeds = doc["seeds"]
        if isinstance(seeds, int) and not isinstance(seeds, bool):
            seeds = [seeds]
        if not isinstance(seeds, list) or not seeds:
            fail("seeds", "must be a non-empty list of integers")
    if any(isinstance(s, bool) or not isinstance(s, int) or s < 0 for s in seeds):
        fail("seeds", f"must be non-negative integers, got {seeds!r}")
    if len(set(seeds)) != len(seeds):
        fail("seeds", "duplicate seed")

    total_budget = None
    if doc.get("total_budget") is not None:
        total_budget = number("total_budget")
        if total_budget < R:
            fail("total_budget", f"must be >= R ({R}), got {total_budget}")

    cost_model = doc.get("cost_model", "resume")
    if cost_model not in schedulers.COST_MODELS:
        fail("cost_model", f"must be one of {list(schedulers.COST_MODELS)}")
    share = doc.get("share_history", False)
    if not isinstance(share, bool):
        fail("share_history", "must be true or false")

    try:
        tpe_params = TpeParams.from_dict(doc.get("tpe"))
    except (TypeError, ValueError) as exc:
        fail("tpe", str(exc))

    space = None
    if doc.get("space") is not None:
        try:
            space = SearchSpace.from_list(doc["space"])
        except SpaceError as exc:
            fail("space", str(exc))

    benchmark = doc["benchmark"]
    if not isinstance(benchmark, str):
        fail("benchmark", "must be a fixture id string")
    try:
        load_benchmark(benchmark, space=space)
    except BenchmarkNotFound as exc:
        fail("benchmark", str(exc))
    except (KeyError, ValueError, TypeError) as exc:
        fail("benchmark" if space is None else "space", f"incompatible with benchmark: {exc}")

    output = doc.get("output") or {}
    if not isinstance(output, dict):
        fail("output", "must be a mapping with 'dir' and optional 'report'")

    return ExperimentFile(
        path=path, benchmark=benchmark, optimizers=list(opts), R=R, eta=eta, seeds=list(seeds),
        total_budget=total_budget, cost_model=cost_model, share_history=share, tpe=tpe_params,
        space=space, output_dir=output.get("dir"), report_path=output.get("report"),
    )


def _run_pair(args):
    config, directory = args
    return harness.execute(config, harness.LogStore(directory))[0]


def cmd_run(path: str, out: str | None = None, seeds: Sequence[int] | None = None,
            parallel: int = 1) -> int:
    try:
        exp = parse_experiment(path, seeds)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out_dir = out or exp.output_dir
    if not out_dir:
        print(f"error: {path}: output: no output directory (use --out or output.dir)", file=sys.stderr)
        return EXIT_INVALID
    configs = exp.run_configs()
    try:
        store = harness.LogStore(out_dir)
        if parallel > 1:
            with ProcessPoolExecutor(max_workers=parallel) as pool:
                results = list(pool.map(_run_pair, [(c, store.directory) for c in configs]))
        else:
            results = [harness.execute(c, store)[0] for c in configs]
    except Exception as exc:  # noqa: BLE001 - anything past parsing is an execution failure
        print(f"error: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_EXECUTION
    by_opt: dict[str, list[float]] = {}
    for res in results:
        if res.best is not None:
            by_opt.setdefault(res.optimizer, []).append(res.best.objective)
    for opt, vals in by_opt.items():
        print(f"{opt:14s} runs={len(vals):3d} mean_best={sum(vals) / len(vals):.6f}")
    print(f"wrote {len(results)} logs to {out_dir}")
    if exp.report_path:
        # with --out the report follows the logs into the new directory
        report = Path(out_dir) / Path(exp.report_path).name if out else Path(exp.report_path)
        report.parent.mkdir(parents=True, exist_ok=True)
        with open(report, "w", encoding="utf-8", newline="") as fh:
            write_report(harness.report_rows(_entries_in(out_dir)), fh)
        print(f"wrote report to {report}")
    return EXIT_OK


def _entries_in(log_dir: str | Path) -> list[list[harness.TrialLogEntry]]:
    return [harness.read_log(f)[0] for f in sorted(Path(log_dir).glob("*.jsonl"))]


def write_report(rows: Sequence[tuple], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(harness.REPORT_HEADER)
    for budget, opt, mean, stderr, n in rows:
        writer.writerow([repr(float(budget)), opt, repr(float(mean)), repr(float(stderr)), n])


def cmd_report(log_dir: str, out: str | None = None) -> int:
    directory = Path(log_dir)
    files = sorted(directory.glob("*.jsonl")) if directory.is_dir() else []
    if not files:
        print(f"error: no logs (*.jsonl) in {log_dir}", file=sys.stderr)
        return EXIT_INVALID
    runs, skipped = [], 0
    for f in files:
        entries, bad = harness.read_log(f)
        skipped += bad
        if entries:
            runs.append(entries)
    if skipped:
        print(f"warning: skipped {skipped} malformed log lines", file=sys.stderr)
    if not runs:
        print(f"error: no valid log entries in {log_dir}", file=sys.stderr)
        return EXIT_INVALID
    rows = harness.report_rows(runs)
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            write_report(rows, fh)
    else:
        write_report(rows, sys.stdout)
    return EXIT_OK


def format_brackets(R: float, eta: float) -> str:
    lines = [f"R={R:g} eta={eta:g}", f"{'s':>3} {'n':>6} {'r0':>12}  rungs (n_i, r_i, keep)"]
    for p in schedulers.compute_brackets(R, eta):
        rungs = " ".join(f"({r.n},{r.r:g},{r.keep})" for r in p.rungs)
        lines.append(f"{p.s:>3} {p.n:>6} {p.r0:>12.6g}  {rungs}")
    return "\n".join(lines)


def cmd_validate(path: str) -> int:
    try:
        exp = parse_experiment(path)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"{exp.path}: ok ({len(exp.optimizers)} optimizers x {len(exp.seeds)} seeds on {exp.benchmark})")
    print(format_brackets(exp.R, exp.eta))
    return EXIT_OK


def _seed_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="hypertpe", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment file")
    p_run.add_argument("experiment")
    p_run.add_argument("--out", help="log directory (overrides output.dir)")
    p_run.add_argument("--seeds", type=_seed_list, help="comma-separated seed override")
    p_run.add_argument("--parallel", type=int, default=1, help="max concurrent seed-runs")

    p_rep = sub.add_parser("report", help="aggregate logs into a CSV table")
    p_rep.add_argument("log_dir")
    p_rep.add_argument("--out", help="CSV path (default: stdout)")

    p_val = sub.add_parser("validate", help="check an experiment file and print its brackets")
    p_val.add_argument("experiment")

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.experiment, args.out, args.seeds, args.parallel)
    if args.command == "report":
        return cmd_report(args.log_dir, args.out)
    return cmd_validate(args.experiment)


if __name__ == "__main__":
    sys.exit(main())

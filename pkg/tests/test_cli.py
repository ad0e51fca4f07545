import csv
import math
import shutil
import subprocess
import sys
import textwrap
from pathlib import Path

import pytest

from hypertpe import cli, harness
from hypertpe.schedulers import compute_brackets

from conftest import ROOT

EXPERIMENTS = ROOT / "experiments"


def write(tmp_path, body, name="exp.yaml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(body))
    return p


MINIMAL = """\
benchmark: EASY
optimizers: [random]
R: 81
eta: 3
seeds: [0]
"""


class TestRun:
    def test_minimal(self, tmp_path, capsys):
        out = tmp_path / "logs"
        assert cli.main(["run", str(EXPERIMENTS / "minimal.yaml"), "--out", str(out)]) == 0
        assert [p.name for p in out.glob("*.jsonl")] == ["easy-random-seed0.jsonl"]
        assert "random" in capsys.readouterr().out

    def test_eta_one(self, tmp_path, capsys):
        p = write(tmp_path, MINIMAL.replace("eta: 3", "eta: 1"))
        assert cli.main(["run", str(p), "--out", str(tmp_path / "o")]) == 1
        err = capsys.readouterr().err
        assert f"{p}:4: eta" in err and "> 1" in err
        assert not (tmp_path / "o").exists()

    def test_no_output_dir(self, tmp_path, capsys):
        assert cli.main(["run", str(write(tmp_path, MINIMAL))]) == 1
        assert "output" in capsys.readouterr().err

    def test_seed_override(self, tmp_path):
        out = tmp_path / "o"
        assert cli.main(["run", str(write(tmp_path, MINIMAL)), "--out", str(out), "--seeds", "3,4"]) == 0
        assert sorted(p.name for p in out.glob("*.jsonl")) == ["easy-random-seed3.jsonl", "easy-random-seed4.jsonl"]

    def test_execution_failure_exits_2(self, tmp_path, monkeypatch, capsys):
        def boom(*a, **k):
            raise RuntimeError("disk on fire")

        monkeypatch.setattr(harness, "execute", boom)
        assert cli.main(["run", str(write(tmp_path, MINIMAL)), "--out", str(tmp_path / "o")]) == 2
        assert "disk on fire" in capsys.readouterr().err

    def test_parallel(self, tmp_path):
        p = write(tmp_path, MINIMAL.replace("seeds: [0]", "seeds: [0, 1]").replace("[random]", "[random, hyperband]"))
        assert cli.main(["run", str(p), "--out", str(tmp_path / "o"), "--parallel", "2"]) == 0
        assert len(list((tmp_path / "o").glob("*.jsonl"))) == 4


@pytest.fixture(scope="module")
def four_way_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("four_way")
    assert cli.main(["run", str(EXPERIMENTS / "medium_four_way.yaml"), "--out", str(out)]) == 0
    return out


def test_four_way_logs_match_ledger_oracle(four_way_dir):
    logs = sorted(four_way_dir.glob("*.jsonl"))
    assert len(logs) == 40
    plans = compute_brackets(81, 3)
    hb_evals = sum(r.n for p in plans for r in p.rungs)
    hb_total = sum(r.n * (r.r - (p.rungs[i - 1].r if i else 0)) for p in plans for i, r in enumerate(p.rungs))
    for log in logs:
        entries, bad = harness.read_log(log)
        assert bad == 0
        if "-hyperband" in log.name:
            assert len(entries) == hb_evals == 206
            assert len({e.trial_id for e in entries}) == sum(p.n for p in plans) == 143
            assert harness.replay_ledger(entries) == hb_total == 1581
        else:
            assert len(entries) == math.floor(hb_total / 81)
            assert harness.replay_ledger(entries) == len(entries) * 81
        assert entries[-1].cumulative == harness.replay_ledger(entries)


def test_four_way_report(four_way_dir, tmp_path, capsys):
    out = tmp_path / "report.csv"
    assert cli.main(["report", str(four_way_dir), "--out", str(out)]) == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    groups = {}
    for row in rows:
        groups.setdefault(row["optimizer"], []).append(row)
    assert set(groups) == {"random", "tpe", "hyperband", "hyperband_tpe"}
    for rs in groups.values():
        means = [float(r["mean_best"]) for r in rs]
        budgets = [float(r["budget"]) for r in rs]
        assert means == sorted(means) and budgets == sorted(budgets)
    # the configured report is written by the run itself
    assert (four_way_dir / "report.csv").read_text() == out.read_text()


class TestReport:
    def test_one_trial(self, tmp_path, capsys):
        logs = tmp_path / "logs"
        cli.main(["run", str(EXPERIMENTS / "minimal.yaml"), "--out", str(logs)])
        # a 1-trial log
        lines = (logs / "easy-random-seed0.jsonl").read_text().splitlines()
        (logs / "easy-random-seed0.jsonl").write_text(lines[0] + "\n")
        capsys.readouterr()
        assert cli.main(["report", str(logs)]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "budget,optimizer,mean_best,stderr,n_runs"
        assert len(out) == 2 and out[1].startswith("1.0,random,")

    def test_empty_dir(self, tmp_path, capsys):
        assert cli.main(["report", str(tmp_path)]) == 1
        assert "no logs" in capsys.readouterr().err

    def test_malformed_lines_counted(self, tmp_path, capsys):
        logs = tmp_path / "logs"
        cli.main(["run", str(EXPERIMENTS / "minimal.yaml"), "--out", str(logs)])
        with open(logs / "easy-random-seed0.jsonl", "a") as fh:
            fh.write("garbage\n{}\n")
        capsys.readouterr()
        assert cli.main(["report", str(logs)]) == 0
        assert "skipped 2 malformed" in capsys.readouterr().err


class TestValidate:
    def test_bracket_table(self, capsys):
        assert cli.main(["validate", str(EXPERIMENTS / "medium_four_way.yaml")]) == 0
        lines = capsys.readouterr().out.splitlines()
        rows = [l.split() for l in lines[3:]]
        assert [(int(r[0]), int(r[1]), float(r[2])) for r in rows] == [
            (4, 81, 1.0), (3, 34, 3.0), (2, 15, 9.0), (1, 8, 27.0), (0, 5, 81.0)]

    def test_log_uniform_zero(self, tmp_path, capsys):
        p = write(tmp_path, MINIMAL + textwrap.dedent("""\
            space:
              - {name: lr, kind: log-uniform, low: 0, high: 1}
              - {name: bs, kind: uniform, low: 16, high: 512}
            """))
        assert cli.main(["validate", str(p)]) == 1
        err = capsys.readouterr().err
        assert "space" in err and "lr" in err

    def test_missing_fixture(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("HYPERTPE_FIXTURES", str(tmp_path / "nowhere"))
        assert cli.main(["validate", str(write(tmp_path, MINIMAL))]) == 1
        assert "benchmark" in capsys.readouterr().err

    @pytest.mark.parametrize("edit,field", [
        (("R: 81", "R: 0.5"), "R"),
        (("[random]", "[randomm]"), "optimizers"),
        (("seeds: [0]", "seeds: [-1]"), "seeds"),
        (("seeds: [0]", "seeds: [0]\ncost_model: cheap"), "cost_model"),
        (("seeds: [0]", "seeds: [0]\ntpe: {gamma: 2}"), "tpe"),
        (("seeds: [0]", "seeds: [0]\ncolour: red"), "colour"),
        (("seeds: [0]", "seeds: [0]\ntotal_budget: 10"), "total_budget"),
    ])
    def test_field_errors(self, tmp_path, capsys, edit, field):
        body = MINIMAL.replace(*edit)
        assert cli.main(["validate", str(write(tmp_path, body))]) == 1
        assert f": {field}:" in capsys.readouterr().err

    def test_yaml_syntax_error(self, tmp_path, capsys):
        assert cli.main(["validate", str(write(tmp_path, "R: [1, 2\n"))]) == 1
        assert "YAML" in capsys.readouterr().err

    def test_validate_implies_parse(self):
        for path in sorted(EXPERIMENTS.glob("*.yaml")):
            assert cli.cmd_validate(str(path)) == 0
            cli.parse_experiment(path)


def test_console_script_module_entry(tmp_path):
    res = subprocess.run([sys.executable, "-m", "hypertpe", "validate", str(EXPERIMENTS / "minimal.yaml")],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "R=81 eta=3" in res.stdout

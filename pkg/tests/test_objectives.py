import dataclasses
import math

import numpy as np
import pytest
import yaml

from hypertpe.objectives import (
    BASE_FUNCTIONS,
    BenchmarkNotFound,
    EvaluationRequest,
    MissingMetric,
    ResourceOutOfRange,
    SyntheticCurveSpec,
    combine_metrics,
    evaluate_composite_synthetic,
    evaluate_synthetic,
    grid_extrema,
    hash01,
    load_benchmark,
)
from hypertpe.space import ParameterSpec, SearchSpace, from_unit, sample_prior

from conftest import FIXTURES

UNIT2 = SearchSpace((ParameterSpec("a", "uniform", 0, 1), ParameterSpec("b", "uniform", 0, 1)))


def noiseless(bench, rate=50.0):
    curve = dataclasses.replace(bench.curve, noise_sigma=0.0, rate_lo=rate, rate_hi=rate)
    composite = dataclasses.replace(bench.composite, curve=curve) if bench.composite else None
    return dataclasses.replace(bench, curve=curve, composite=composite)


class TestSynthetic:
    def spec(self, **kw):
        base = dict(base_fn="branin", rate_lo=50.0, rate_hi=50.0, noise_sigma=0.0, R=81.0, space=UNIT2,
                    f_min=0.397887, f_max=308.13)
        base.update(kw)
        return SyntheticCurveSpec(**base)

    def test_full_fidelity_equals_asymptote(self):
        spec = self.spec()
        rng = np.random.default_rng(0)
        for _ in range(20):
            cfg = sample_prior(UNIT2, rng)
            res = evaluate_synthetic(spec, EvaluationRequest(cfg, 81.0, 0))
            assert res.objective == pytest.approx(spec.asymptote(np.array([cfg["a"], cfg["b"]])), abs=1e-6)

    def test_monotone_in_resource(self):
        spec = self.spec(rate_lo=1.0, rate_hi=20.0)
        rng = np.random.default_rng(1)
        rs = np.linspace(0.5, 81, 60)
        for _ in range(20):
            cfg = sample_prior(UNIT2, rng)
            values = [evaluate_synthetic(spec, EvaluationRequest(cfg, r, 0)).objective for r in rs]
            if values[-1] > 0:
                assert np.all(np.diff(values) > 0)

    @pytest.mark.parametrize("r", [0.0, -1.0, 81.5, math.nan])
    def test_resource_out_of_range(self, r):
        with pytest.raises(ResourceOutOfRange):
            evaluate_synthetic(self.spec(), EvaluationRequest({"a": 0.5, "b": 0.5}, r, 0))

    def test_noise_is_seeded(self):
        spec = self.spec(noise_sigma=0.05)
        req = EvaluationRequest({"a": 0.3, "b": 0.4}, 27.0, 123)
        assert evaluate_synthetic(spec, req) == evaluate_synthetic(spec, req)
        other = EvaluationRequest({"a": 0.3, "b": 0.4}, 27.0, 124)
        assert evaluate_synthetic(spec, req).objective != evaluate_synthetic(spec, other).objective

    def test_hash01_range_and_stability(self):
        vals = [hash01(np.array([i / 100, 0.5])) for i in range(100)]
        assert all(0 <= v <= 1 for v in vals)
        assert hash01(np.array([0.25, 0.75])) == hash01(np.array([0.25, 0.75]))
        assert len(set(vals)) == 100

    def test_rejects_bad_spec(self):
        with pytest.raises(ValueError):
            self.spec(rate_lo=0.0)
        with pytest.raises(ValueError):
            self.spec(base_fn="sphere")


@pytest.mark.parametrize("fixture", ["easy", "medium"])
def test_fixture_normalization_matches_grid_oracle(fixture):
    doc = yaml.safe_load((FIXTURES / f"{fixture}.yaml").read_text())
    fn = BASE_FUNCTIONS[doc["base_fn"]]
    # independent brute force over the same 1000 x 1000 grid
    axis = np.linspace(0, 1, 1000)
    values = np.array([fn(np.column_stack([np.full(1000, a), axis])) for a in axis])
    norm = doc["normalization"]
    assert values.min() == pytest.approx(norm["min"], rel=1e-12, abs=1e-15)
    assert values.max() == pytest.approx(norm["max"], rel=1e-12)
    i, j = np.unravel_index(values.argmin(), values.shape)
    np.testing.assert_allclose([axis[i], axis[j]], norm["argmin_unit"], rtol=0, atol=1e-15)
    lo, hi, _ = grid_extrema(doc["base_fn"], 1000)
    assert (lo, hi) == (norm["min"], norm["max"])


@pytest.mark.parametrize("fixture", ["EASY", "MEDIUM"])
def test_asymptote_at_argmin_is_one(fixture):
    bench = noiseless(load_benchmark(fixture))
    argmin = yaml.safe_load((FIXTURES / f"{fixture.lower()}.yaml").read_text())["normalization"]["argmin_unit"]
    cfg = from_unit(bench.space, argmin)
    assert bench(cfg, bench.curve.R, 0).objective == pytest.approx(1.0, abs=1e-6)


def test_known_optimum_bounds_prior_samples():
    for fid in ("EASY", "MEDIUM"):
        bench = noiseless(load_benchmark(fid))
        rng = np.random.default_rng(0)
        best = max(bench(sample_prior(bench.space, rng), 81, 0).objective for _ in range(500))
        assert best <= bench.optimum + 1e-9


class TestCombine:
    @pytest.mark.parametrize("alpha,m,fps,expected", [(0, 0.7, 30, 30), (100, 0.7, 30, 100), (50, 0.5, 12.5, 37.5)])
    def test_examples(self, alpha, m, fps, expected):
        assert combine_metrics(alpha, {"map": m, "fps": fps}) == pytest.approx(expected, abs=1e-12)

    def test_missing(self):
        with pytest.raises(MissingMetric):
            combine_metrics(1.0, {"map": 0.5})

    def test_non_finite(self):
        with pytest.raises(ValueError):
            combine_metrics(1.0, {"map": math.nan, "fps": 1.0})


class TestComposite:
    @pytest.fixture
    def hard(self):
        return noiseless(load_benchmark("HARD"))

    def uniform_config(self, bench, t):
        return {p.name: int(max(p.low, min(p.high, round(t * p.high)))) for p in bench.space.params}

    def metrics(self, bench, cfg, alpha=None):
        spec = bench.composite if alpha is None else dataclasses.replace(bench.composite, alpha=alpha)
        return evaluate_composite_synthetic(spec, EvaluationRequest(cfg, bench.curve.R, 0))

    def test_space_is_21_integer_ranks(self, hard):
        assert len(hard.space) == 21
        assert [p.high for p in hard.space.params] == list(hard.composite.filters)
        assert all(p.kind == "integer" and p.low == 1 for p in hard.space.params)

    def test_endpoints(self, hard):
        rng = np.random.default_rng(0)
        top = self.metrics(hard, {p.name: int(p.high) for p in hard.space.params}).metrics
        bottom = self.metrics(hard, {p.name: int(p.low) for p in hard.space.params}).metrics
        for _ in range(200):
            m = self.metrics(hard, sample_prior(hard.space, rng)).metrics
            assert bottom["map"] <= m["map"] <= top["map"]
            assert top["fps"] <= m["fps"] <= bottom["fps"]

    def test_alpha_sweep_moves_toward_accuracy(self, hard):
        grid = [self.uniform_config(hard, t) for t in np.linspace(0.0, 1.0, 64)]
        picks = []
        for alpha in (0.0, 50.0, 200.0):
            scores = [self.metrics(hard, c, alpha).objective for c in grid]
            picks.append(self.metrics(hard, grid[int(np.argmax(scores))], alpha).metrics)
        maps = [p["map"] for p in picks]
        fps = [p["fps"] for p in picks]
        assert maps == sorted(maps) and fps == sorted(fps, reverse=True)
        assert picks[0]["fps"] == max(self.metrics(hard, c).metrics["fps"] for c in grid)
        assert maps[0] < maps[-1]

    def test_objective_is_combined(self, hard):
        cfg = sample_prior(hard.space, np.random.default_rng(3))
        res = self.metrics(hard, cfg)
        assert res.objective == combine_metrics(hard.composite.alpha, res.metrics)


class TestLoading:
    def test_case_insensitive(self):
        assert load_benchmark("easy").id == load_benchmark("EASY").id == "EASY"

    def test_missing(self, tmp_path):
        with pytest.raises(BenchmarkNotFound):
            load_benchmark("NOPE")
        with pytest.raises(BenchmarkNotFound):
            load_benchmark("EASY", root=tmp_path)

    def test_env_root(self, tmp_path, monkeypatch):
        (tmp_path / "easy.yaml").write_text((FIXTURES / "easy.yaml").read_text())
        monkeypatch.setenv("HYPERTPE_FIXTURES", str(tmp_path))
        assert load_benchmark("EASY").id == "EASY"

    def test_with_R_rescales(self):
        bench = noiseless(load_benchmark("EASY")).with_R(300)
        cfg = sample_prior(bench.space, np.random.default_rng(0))
        assert bench(cfg, 300, 0).objective == pytest.approx(noiseless(load_benchmark("EASY"))(cfg, 81, 0).objective)
        with pytest.raises(ResourceOutOfRange):
            bench(cfg, 301, 0)

    def test_space_override_must_fit(self):
        one = SearchSpace((ParameterSpec("x", "uniform", 0, 1),))
        with pytest.raises(ValueError, match="2-parameter"):
            load_benchmark("EASY", space=one)

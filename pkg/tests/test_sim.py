import json
import math

import numpy as np
import pytest

from storrel import closedform, coldstore, ctmc, sim
from storrel.exceptions import ModelError, NoEventsError, SingularSystemError

COMPILED = "cython" in sim.BACKENDS
needs_compiled = pytest.mark.skipif(not COMPILED, reason="compiled kernels not built")


def random_models(count, seed):
    """Small absorbing chains with O(1) rates, so replicates are short."""
    rng = np.random.default_rng(seed)
    models = []
    for _ in range(count):
        size = int(rng.integers(2, 6))
        trans = [(i, i + 1, float(rng.uniform(0.2, 2.0))) for i in range(size)]
        for _ in range(int(rng.integers(0, 2 * size))):
            s, d = int(rng.integers(0, size)), int(rng.integers(0, size + 1))
            if s != d:
                trans.append((s, d, float(rng.uniform(0.1, 3.0))))
        labels = [f"s{i}" for i in range(size + 1)]
        models.append(ctmc.RateModel.build(labels, trans, 0, [size]))
    return models


class TestDeterminism:
    @pytest.mark.parametrize("workers,chunk", [(2, None), (3, 7), (4, 1)])
    def test_markov_independent_of_threads(self, workers, chunk):
        model = ctmc.canonical_model(3, 2, 0.05, 1.0)
        cfg = sim.SimConfig(replicates=500, seed=12)
        a = sim.run_replicates(model, cfg, workers=1)
        b = sim.run_replicates(model, cfg, workers=workers, chunk_size=chunk)
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.final_states, b.final_states)

    @pytest.mark.parametrize("mode", ["cold-full", "cold-approx"])
    def test_cold_modes_independent_of_threads(self, mode):
        model = coldstore.ColdModel(4, 2, lam=1 / 500)
        cfg = sim.SimConfig(replicates=300, seed=5, mode=mode)
        a = sim.run_replicates(model, cfg, workers=1)
        b = sim.run_replicates(model, cfg, workers=3, chunk_size=11)
        assert np.array_equal(a.times, b.times) and np.array_equal(a.kinds, b.kinds)

    def test_thread_count_from_environment(self, monkeypatch):
        monkeypatch.setenv(sim.THREADS_ENV, "3")
        assert sim.default_workers() == 3
        monkeypatch.setenv(sim.THREADS_ENV, "many")
        assert sim.default_workers() == 1

    def test_seed_changes_stream(self):
        model = ctmc.canonical_model(1, 1, 0.1, 1.0)
        a = sim.run_replicates(model, sim.SimConfig(50, seed=1)).times
        b = sim.run_replicates(model, sim.SimConfig(50, seed=2)).times
        assert not np.array_equal(a, b)


@needs_compiled
class TestBackendEquivalence:
    def test_markov(self):
        model = ctmc.canonical_model(4, 2, 0.02, 0.5)
        cfg = sim.SimConfig(replicates=400, seed=99, bias=sim.BiasConfig(1, 3.0))
        a = sim.run_replicates(model, cfg, backend="python")
        b = sim.run_replicates(model, cfg, backend="cython")
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.weights, b.weights)

    @pytest.mark.parametrize("mode", ["cold-full", "cold-approx"])
    def test_cold(self, mode):
        model = coldstore.ColdModel(6, 3, lam=1 / 800, exchange_rate=50.0)
        cfg = sim.SimConfig(replicates=150, seed=4, mode=mode)
        a = sim.run_replicates(model, cfg, backend="python")
        b = sim.run_replicates(model, cfg, backend="cython")
        assert np.array_equal(a.times, b.times) and np.array_equal(a.kinds, b.kinds)

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            sim.get_backend("fortran")


class TestUnbiased:
    def test_no_repair_pair(self):
        lam = 1e-3
        out = sim.run_replicates(ctmc.canonical_model(1, 1, lam, 0.0), sim.SimConfig(100_000, seed=8))
        assert sim.estimate_mean_time(out).value == pytest.approx(1.5 / lam, rel=0.02)

    def test_single_parity_against_closed_form(self):
        lam, mu = 1 / 1000, 1 / 24
        out = sim.run_replicates(ctmc.canonical_model(1, 1, lam, mu), sim.SimConfig(20_000, seed=21))
        est = sim.estimate_mean_time(out)
        assert abs(est.value - closedform.mttdl_exact(1, 1, lam, mu)) < 3 * est.stderr

    @pytest.mark.parametrize("index", range(20))
    def test_random_models_against_linear_solve(self, index):
        model = random_models(20, seed=2024)[index]
        out = sim.run_replicates(model, sim.SimConfig(4000, seed=index))
        est = sim.estimate_mean_time(out)
        exact = ctmc.mttdl_linear_solve(model).mttdl
        assert abs(est.value - exact) < 3 * est.stderr

    def test_unreliability_against_transient_solution(self):
        model = ctmc.canonical_model(2, 1, 1 / 500, 1 / 24)
        t = 2000.0
        out = sim.run_replicates(model, sim.SimConfig(20_000, seed=3, horizon=t))
        est = sim.estimate_unreliability(out, t)
        assert abs(est.value - ctmc.unreliability_at(model, t)) < 3 * est.stderr


class TestEstimators:
    def _outcome(self, times, kinds=None, weights=None):
        times = np.asarray(times, dtype=float)
        kinds = np.zeros(times.size, dtype=np.int64) if kinds is None else np.asarray(kinds)
        weights = np.ones(times.size) if weights is None else np.asarray(weights, dtype=float)
        return sim.SimOutcome(times, kinds, weights, sim.SimConfig(times.size))

    def test_constant_times(self):
        est = sim.estimate_mean_time(self._outcome([7.0] * 5))
        assert est.value == 7.0 and est.stderr == 0.0 and est.ci == (7.0, 7.0)

    def test_unreliability_limits(self):
        out = self._outcome([1.0, 2.0, 3.0])
        assert sim.estimate_unreliability(out, 0.0).value == 0.0
        assert sim.estimate_unreliability(out, math.inf).value == 1.0

    def test_censored_replicates_left_out(self):
        out = self._outcome([1.0, 3.0, 50.0], kinds=[0, 0, 2])
        assert sim.estimate_mean_time(out).value == 2.0
        assert int(out.censored.sum()) == 1

    def test_kind_selection(self):
        out = self._outcome([1.0, 3.0, 5.0, 9.0], kinds=[0, 1, 0, 1])
        assert sim.estimate_mean_time(out, "unavailability").value == 6.0
        assert sim.estimate_mean_time(out, "data-loss").value == 3.0
        with pytest.raises(ValueError):
            sim.estimate_mean_time(out, "outage")

    def test_no_events(self):
        with pytest.raises(NoEventsError):
            sim.estimate_mean_time(self._outcome([1.0, 2.0], kinds=[2, 2]))

    def test_exports(self, tmp_path):
        out = self._outcome([1.0, 3.0], kinds=[0, 2])
        out.to_csv(tmp_path / "o.csv")
        lines = (tmp_path / "o.csv").read_text().splitlines()
        assert lines[0] == "replicate,time_hours,kind,weight"
        assert lines[2].split(",")[2] == "censored"
        doc = json.loads(out.to_json())
        assert doc["n"] == 2 and doc["censored"] == 1 and doc["mttdl"] is None


class TestFailureBiasing:
    def test_unit_factor_is_plain_run(self):
        model = ctmc.canonical_model(2, 2, 0.01, 0.5)
        plain = sim.run_replicates(model, sim.SimConfig(300, seed=17))
        biased = sim.failure_biasing(model, sim.SimConfig(300, seed=17, bias=sim.BiasConfig(1, 1.0)))
        assert np.array_equal(plain.times, biased.times)
        assert np.all(biased.weights == 1.0)

    def test_agrees_with_unbiased_run(self):
        # the likelihood ratio compounds over every repair cycle of a path,
        # so mean-time estimates call for a mild factor
        lam, mu = 1 / 1000, 1 / 24
        model = ctmc.canonical_model(1, 1, lam, mu)
        plain = sim.estimate_mean_time(sim.run_replicates(model, sim.SimConfig(20_000, seed=31)))
        biased = sim.estimate_mean_time(sim.failure_biasing(
            model, sim.SimConfig(20_000, seed=32, bias=sim.BiasConfig(1, 1.5))))
        assert abs(plain.value - biased.value) < 3 * math.hypot(plain.stderr, biased.stderr)

    def test_rare_loss_variance_drops(self):
        model = ctmc.canonical_model(8, 3, 1e-3, 1e-1)
        t, n = 100.0, 20_000
        exact = ctmc.unreliability_at(model, t)
        out = sim.failure_biasing(model, sim.SimConfig(n, seed=3, horizon=t, bias=sim.BiasConfig(1, 5.0)))
        est = sim.estimate_unreliability(out, t)
        plain_se = math.sqrt(exact * (1 - exact) / n)
        assert est.stderr < plain_se
        assert abs(est.value - exact) < 3 * est.stderr
        assert out.meta["effective_sample_size"] > 0.05 * n

    def test_degenerate_weights_warn(self):
        model = ctmc.canonical_model(8, 3, 1e-3, 1e-1)
        cfg = sim.SimConfig(2000, seed=3, horizon=100.0, bias=sim.BiasConfig(0, 60.0))
        with pytest.warns(RuntimeWarning):
            sim.failure_biasing(model, cfg)

    def test_needs_bias(self):
        with pytest.raises(ModelError):
            sim.failure_biasing(ctmc.canonical_model(1, 1, 0.1, 1.0), sim.SimConfig(10))


class TestColdModes:
    def test_kinds_and_horizon(self):
        model = coldstore.ColdModel(4, 2, lam=1 / 500)
        out = sim.run_replicates(model, sim.SimConfig(400, seed=2, mode="cold-full", horizon=300.0))
        assert set(np.unique(out.kinds)) <= {0, 1, 2}
        assert np.all(out.times[out.censored] == 300.0)
        assert np.all(out.times[~out.censored] <= 300.0)

    def test_estimate_inside_bounds(self):
        model = coldstore.ColdModel(4, 2, lam=1 / 2000, exchange_rate=1.0)
        out = sim.run_replicates(model, sim.SimConfig(3000, seed=9, mode="cold-full"))
        est = sim.estimate_mean_time(out)
        lb, ub = coldstore.lower_bound(model), coldstore.upper_bound(model)
        assert lb <= est.ci[1] and est.ci[0] <= 1.05 * ub


class TestValidation:
    def test_config(self):
        with pytest.raises(ModelError):
            sim.SimConfig(replicates=0)
        with pytest.raises(ModelError):
            sim.SimConfig(mode="hot")
        with pytest.raises(ModelError):
            sim.SimConfig(seed=-1)
        with pytest.raises(ModelError):
            sim.BiasConfig(1, 0.5)

    def test_mode_model_mismatch(self):
        with pytest.raises(ModelError):
            sim.run_replicates(coldstore.ColdModel(4, 2), sim.SimConfig(10))
        with pytest.raises(ModelError):
            sim.run_replicates(ctmc.canonical_model(1, 1, 0.1, 1.0), sim.SimConfig(10, mode="cold-full"))

    def test_unreachable_absorption(self):
        model = ctmc.RateModel.build(["a", "b", "F"], [("a", "b", 1.0), ("b", "a", 1.0)], 0, [2])
        with pytest.raises(SingularSystemError):
            sim.run_replicates(model, sim.SimConfig(10))

import math

import numpy as np
import pytest

from ganbound.distance import SearchOptions
from ganbound.distributions import DistributionSpec, draw_samples
from ganbound.errors import ConfigError, OracleCapError
from ganbound.experiments import (
    ExperimentConfig,
    GapRecord,
    aggregate_by_n,
    dyadic_block,
    dyadic_blocking_summary,
    fit_rate,
    replicate_seed,
    run_error_experiment,
    scalar_toy_config,
    scalar_toy_specs,
    trend_spearman,
    verify_decomposition,
)
from ganbound.nets import MeasuringFunction, NetworkSpec
from ganbound.verification import decomposition_suite

ID = MeasuringFunction("identity")
SMALL = SearchOptions(grid_points=21, theta_grid_points=401)


def synthetic(gaps_by_n, kind="theorem1", reps=1):
    return [GapRecord("s", kind, n, n, r, g, True, "grid", "grid", 0)
            for n, g in gaps_by_n.items() for r in range(reps)]


NS = [2**k for k in range(6, 15)]


def test_fit_exact_rate():
    fit = fit_rate(synthetic({n: math.sqrt(math.log(n) / n) for n in NS}))
    assert fit.slope == pytest.approx(1.0, abs=1e-12) and fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept == pytest.approx(0.0, abs=1e-12)


def test_fit_scaled_rate():
    fit = fit_rate(synthetic({n: 3 * math.sqrt(math.log(n) / n) for n in NS}))
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3), abs=1e-12)


def test_fit_constant():
    assert fit_rate(synthetic({n: 0.25 for n in NS})).slope == pytest.approx(0.0, abs=1e-12)


def test_fit_log_n_regressor():
    fit = fit_rate(synthetic({n: n ** -0.5 for n in NS}), "log_n")
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)


def test_fit_needs_three_positive_points():
    recs = synthetic({64: 0.1, 128: 0.0, 256: -0.01, 512: 0.05})
    with pytest.raises(ValueError, match="excluded"):
        fit_rate(recs)
    fit = fit_rate(synthetic({64: 0.1, 128: 0.0, 256: 0.07, 512: 0.05}))
    assert fit.excluded == [128] and fit.points_used == [64, 256, 512]
    with pytest.raises(ValueError):
        fit_rate(synthetic({64: 0.1}), "log_cubed")


def test_fit_median_over_replicates():
    recs = synthetic({n: 1.0 for n in (4, 8, 16)}, reps=3)
    for r in recs:
        r.gap = {0: 1.0, 1: 2.0, 2: 100.0}[r.replicate] / r.n
    agg = aggregate_by_n(recs)
    assert agg == {4: 0.5, 8: 0.25, 16: 0.125}
    liang = synthetic({n: 1.0 for n in (4, 8, 16)}, kind="expectation_liang", reps=3)
    for r in liang:
        r.gap = float(r.replicate)
    assert aggregate_by_n(liang) == {4: 1.0, 8: 1.0, 16: 1.0}


def test_dyadic_blocks():
    assert [dyadic_block(n) for n in (2, 3, 4, 5, 64, 65, 128, 1024)] == [1, 2, 2, 3, 6, 7, 7, 10]
    s = dyadic_blocking_summary(synthetic({n: 0.1 for n in (100, 200, 400, 800)}))
    assert [r["k"] for r in s.rows] == [7, 8, 9, 10]
    assert all(r["lower"] < n <= r["upper"] for r in s.rows for n in r["n_values"])


def test_dyadic_exact_rate_normalizes_to_one():
    s = dyadic_blocking_summary(synthetic({n: math.sqrt(math.log(n) / n) for n in NS}))
    assert np.allclose(s.maxima(), 1.0, rtol=1e-12)
    assert s.spread() == pytest.approx(1.0)


def test_dyadic_empty_blocks_noted_and_single_block_rejected():
    s = dyadic_blocking_summary(synthetic({8: 0.1, 9: 0.1, 100: 0.05}))
    assert [r["k"] for r in s.rows] == [3, 4, 7]
    assert len(s.notes) == 2
    assert max(r["max_normalized_gap"] for r in s.rows if r["k"] == 4) == pytest.approx(0.1 * math.sqrt(9 / math.log(9)))
    with pytest.raises(ValueError):
        dyadic_blocking_summary(synthetic({5: 0.1, 6: 0.1}))


def test_config_validation():
    with pytest.raises(ConfigError, match="sorted"):
        scalar_toy_config(n_grid=(128, 64))
    with pytest.raises(ConfigError):
        scalar_toy_config("bogus")
    with pytest.raises(ConfigError):
        scalar_toy_config(m_grid=(1, 2))
    with pytest.raises(ConfigError):
        scalar_toy_config(replicates=0)
    with pytest.raises(ConfigError):
        scalar_toy_config(epsilon_slack=-1.0)
    with pytest.raises(ConfigError):
        scalar_toy_config(abs_mode=False, phi=MeasuringFunction("log"))
    f, g, base, target = scalar_toy_specs()
    with pytest.raises(OracleCapError):
        ExperimentConfig("theorem1", NetworkSpec((1, 4, 1), (1.0, 1.0), ("relu",)), g, ID, target, base, (4, 8))


def test_pairs():
    assert scalar_toy_config(n_grid=(4, 8)).pairs() == [(4, 4), (8, 8)]
    assert scalar_toy_config(n_grid=(4, 8), m_grid=(2, 3)).pairs() == [(4, 2), (8, 3)]
    assert scalar_toy_config("plugin_zhang", n_grid=(4, 8)).pairs() == [(4, 0), (8, 0)]


def test_replicate_seeds_distinct_and_stable():
    seeds = {replicate_seed(7, n, n, r) for n in (4, 8) for r in range(50)}
    assert len(seeds) == 100
    assert replicate_seed(7, 4, 4, 0) == replicate_seed(7, 4, 4, 0)


@pytest.mark.parametrize("kind", ["theorem1", "sup_gap_arora", "plugin_zhang", "plugin_ji", "expectation_liang"])
def test_small_experiment_records(kind):
    cfg = scalar_toy_config(kind, replicates=4, n_grid=(16, 64, 256), search=SMALL)
    recs = run_error_experiment(cfg)
    assert len(recs) == 12
    assert [(r.n, r.replicate) for r in recs] == sorted((r.n, r.replicate) for r in recs)
    assert all(math.isfinite(r.gap) for r in recs)
    if kind in ("theorem1", "sup_gap_arora"):
        assert all(r.gap >= 0 for r in recs)
    else:
        # grid oracle sup and grid inf: the plug-in gap cannot go below zero
        assert all(r.gap >= 0 and not r.flagged for r in recs)
    if kind in ("plugin_zhang", "expectation_liang"):
        assert all(r.m == 0 for r in recs)


def test_matched_target_theorem1_is_empirical_inf():
    cfg = scalar_toy_config(replicates=3, n_grid=(32, 128), search=SMALL)
    recs = run_error_experiment(cfg)
    assert all(r.gap >= 0 for r in recs)


def test_determinism_and_threads():
    cfg = scalar_toy_config("plugin_ji", replicates=5, n_grid=(16, 32), search=SMALL)
    a = run_error_experiment(cfg)
    b = run_error_experiment(cfg, threads=3)
    key = lambda rs: [(r.n, r.m, r.replicate, r.gap, r.seed) for r in rs]  # noqa: E731
    assert key(a) == key(b)


def test_pgd_sup_records_flag_negative_gaps():
    cfg = scalar_toy_config("plugin_zhang", replicates=2, n_grid=(16, 32), sup_method="pgd",
                            search=SearchOptions(grid_points=21, theta_grid_points=11, restarts=2, iterations=20))
    recs = run_error_experiment(cfg)
    assert all(r.flagged == (r.gap < 0) for r in recs)


def test_trend_spearman():
    assert trend_spearman(synthetic({n: 1 / n for n in NS})) == pytest.approx(-1.0)


def test_decomposition_examples():
    f, g, base, target = scalar_toy_specs()
    opts = SearchOptions(grid_points=21, theta_grid_points=201)
    rng = np.random.default_rng(4)
    rec = verify_decomposition(f, g, ID, draw_samples(target, base, 50, 50, rng), target, base, opts)
    assert rec["slack"] >= 0 and rec["lhs"] == pytest.approx(rec["inf_empirical"], abs=1e-12)
    one = verify_decomposition(f, g, ID, draw_samples(target, base, 1, 1, rng), target, base, opts)
    assert one["slack"] >= 0
    big = verify_decomposition(f, g, ID, draw_samples(target, base, 10_000, 10_000, rng), target, base, opts)
    assert big["lhs"] <= 0.05 and big["slack"] >= 0


def test_decomposition_plugin_population():
    f = NetworkSpec((2, 1, 1), (1.0, 1.0), ("relu",))
    g = NetworkSpec((1, 2), (1.0,))
    base = DistributionSpec.uniform_cube(1.0, 1)
    target = DistributionSpec.uniform_ball(1.0, 2)
    rng = np.random.default_rng(5)
    rec = verify_decomposition(f, g, ID, draw_samples(target, base, 30, 20, rng), target, base,
                               SearchOptions(grid_points=11, theta_grid_points=11), 20_000, rng)
    assert rec["holds"]


def test_decomposition_suite_small():
    out = decomposition_suite(np.random.default_rng(3), instances=8)
    assert out["passed"]

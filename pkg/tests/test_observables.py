import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_config
from impact_lattice import core, rng
from impact_lattice.core import ModelParams, ParameterError
from impact_lattice.observables import (
    EnsembleStats,
    empirical_sustain_field,
    ensemble_run,
    measure_run,
    sustain_probability_field,
    trend_check,
)


@settings(max_examples=40, deadline=None)
@given(L=st.integers(1, 9), K=st.integers(1, 4), alpha=st.sampled_from([1.0, 2.0, 3.0, 6.0]),
       T=st.sampled_from([0.0, 0.5, 1.0, 3.0]), seed=st.integers(0, 10**6))
def test_sustain_field_bounds(L, K, alpha, T, seed):
    c = core.init_configuration(ModelParams(L=L, K=K, alpha=alpha, temperature=T, seed=seed))
    v = sustain_probability_field(c).values
    assert v.shape == (L, L)
    assert np.all(v >= 0) and np.all(v <= 1)
    if T == 0:
        assert set(np.unique(v)) <= {0.0, 1.0}


def test_sustain_single_agent_two_opinions():
    s = 0.63
    for T in (0.5, 1.0, 4.0):
        c = make_config(1, 2, [0], persuasion=[0.1], support=[s], temperature=T, impact_scale=1.0)
        expected = math.exp(s / T) / (math.exp(s / T) + 1)
        assert sustain_probability_field(c).values[0, 0] == pytest.approx(expected, abs=1e-15)
        assert expected > 0.5
        c = make_config(1, 2, [0], persuasion=[0.1], support=[s], temperature=T)
        assert sustain_probability_field(c).values[0, 0] == pytest.approx(
            1 / (1 + math.exp(-4 * s / T)), abs=1e-15
        )


@pytest.fixture(scope="module")
def mixed_config():
    # mid-range keep probabilities on a fixed 5x5 configuration
    c = core.init_configuration(ModelParams(L=5, K=3, alpha=2.0, temperature=2.0, seed=5))
    v = sustain_probability_field(c).values
    assert np.any((v > 0.2) & (v < 0.8))
    return c


def test_empirical_matches_analytic_within_3_sigma(mixed_config):
    n = 100_000
    analytic = sustain_probability_field(mixed_config).values
    empirical = empirical_sustain_field(mixed_config, n, seed=1234).values
    sigma = np.sqrt(analytic * (1 - analytic) / n)
    assert np.all(np.abs(empirical - analytic) <= 3 * sigma + 1e-12)


def test_step_keep_frequency_matches_analytic(mixed_config):
    n = 4000
    analytic = sustain_probability_field(mixed_config).values.ravel()
    kept = np.zeros(25)
    for m in range(n):
        nxt = core.step(mixed_config.evolve(mixed_config.opinions, m))
        kept += nxt.opinions == mixed_config.opinions
    sigma = np.sqrt(analytic * (1 - analytic) / n)
    assert np.all(np.abs(kept / n - analytic) <= 4 * sigma + 1e-12)


def test_empirical_rejects_zero_samples(mixed_config):
    with pytest.raises(ParameterError):
        empirical_sustain_field(mixed_config, 0)


def test_ensemble_single_run_matches_run():
    p = ModelParams(L=10, K=2, alpha=3.0, temperature=1.0, steps=20, seed=7)
    stats = ensemble_run(p, 1)
    single = measure_run(p.replace(seed=rng.derive_seed(7, 0)), 20)
    assert stats.n_runs == 1 and stats.std_smax_frac == 0.0
    assert stats.mean_smax_frac == single.smax_frac
    assert stats.mean_n_clusters == single.n_clusters
    assert stats.mean_histogram == {k: float(v) for k, v in single.histogram.items()}


def test_ensemble_deterministic_and_schedule_free():
    p = ModelParams(L=9, K=2, alpha=6.0, temperature=0.5, steps=15, seed=3)
    a = ensemble_run(p, 4)
    b = ensemble_run(p, 4)
    c = ensemble_run(p, 4, workers=3)
    assert a == b == c
    assert len({r.seed for r in a.runs}) == 4
    hist_total = sum(size * cnt for size, cnt in a.mean_histogram.items())
    assert hist_total == pytest.approx(81)
    assert 0 <= a.mean_smax_frac <= 1 and a.std_smax_frac >= 0


def test_ensemble_measure_step():
    p = ModelParams(L=8, steps=10, seed=1)
    assert ensemble_run(p, 2, measure_step=4).steps == 4
    with pytest.raises(ParameterError):
        ensemble_run(p, 2, measure_step=11)
    with pytest.raises(ParameterError):
        ensemble_run(p, 0)


def _stats(alpha=1.0, T=0.0, smax=1.0, clusters=1.0, L=41):
    return EnsembleStats(alpha, T, 2, L, 1000, 10, smax, 0.0, clusters, 0.0, {}, math.nan, math.nan)


def test_trend_identical_points():
    rep = trend_check([_stats(), _stats()])
    assert rep.ok and rep.steps[0].delta_smax == 0 and rep.varying is None


def test_trend_violation_reported():
    rep = trend_check([_stats(alpha=2.0, smax=0.5), _stats(alpha=3.0, smax=0.9)])
    assert not rep.smax_non_increasing
    assert rep.varying == "alpha"
    assert rep.violations()[0].delta_smax == pytest.approx(0.4)


def test_trend_along_temperature():
    rep = trend_check([_stats(T=0.0, clusters=40), _stats(T=1.0, clusters=8, smax=0.6)])
    assert rep.varying == "temperature"
    assert rep.smax_non_increasing and not rep.clusters_non_decreasing


def test_trend_parameter_errors():
    with pytest.raises(ParameterError):
        trend_check([_stats()])
    with pytest.raises(ParameterError):
        trend_check([_stats(L=41), _stats(L=20, alpha=2.0)])
    with pytest.raises(ParameterError):
        trend_check([_stats(alpha=1.0, T=0.0), _stats(alpha=2.0, T=1.0)])

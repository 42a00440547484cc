import math

import numpy as np
import pytest

from nldebtrank import ConfigError, PropagationRule, ScenarioConfig, generate_synthetic, run_ensemble, sample_shock_set
from nldebtrank.balance import BankingSystem
from nldebtrank.experiment import build_ensemble, sweep_H_surface, total_shock_normalizer


def test_shock_set_all_banks():
    assert sample_shock_set(5, 1.0, np.random.default_rng(0)).tolist() == [0, 1, 2, 3, 4]


def test_shock_set_fixed_size():
    s = sample_shock_set(183, 0.05, np.random.default_rng(0))
    assert len(s) == 9 == len(set(s.tolist()))
    assert s.min() >= 0 and s.max() < 183


def test_shock_set_empty_is_error():
    with pytest.raises(ConfigError, match="empty shock set"):
        sample_shock_set(183, 0.001, np.random.default_rng(0))


def test_shock_set_deterministic():
    a = sample_shock_set(50, 0.2, np.random.default_rng(11))
    b = sample_shock_set(50, 0.2, np.random.default_rng(11))
    np.testing.assert_array_equal(a, b)


def test_total_shock_normalizer():
    assert total_shock_normalizer(0.05, (0.0, 0.01)) == pytest.approx((0.0, 0.2))
    assert total_shock_normalizer(1.0, (0.0, 0.01)) == (0.0, 0.01)
    assert total_shock_normalizer(0.5, (0.0, 0.01)) == pytest.approx((0.0, 0.02))


def test_config_validation():
    with pytest.raises(ConfigError):
        ScenarioConfig(p_shock=0.0)
    with pytest.raises(ConfigError):
        ScenarioConfig(x_shock=1.5)
    with pytest.raises(ConfigError):
        ScenarioConfig(n_networks=0)


@pytest.fixture(scope="module")
def synth():
    return generate_synthetic(60, seed=4)


def small_cfg(**kw):
    base = dict(p=0.1, n_networks=4, n_shock_realizations=3, p_shock=0.1, x_shock=0.005,
                rule=PropagationRule.nonlinear(1.0), base_seed=5)
    base.update(kw)
    return ScenarioConfig(**base)


def test_null_shock_gives_zero_loss(synth):
    res = run_ensemble(synth, small_cfg(x_shock=0.0))
    assert res.mean_H_inf == 0.0 and res.stderr_H_inf == 0.0
    assert res.n_runs == 12


def test_null_shock_with_predefaulted_bank():
    s = BankingSystem.from_arrays(
        [100.0, 100.0, 100.0, 100.0], [90.0, 110.0, 80.0, 70.0],
        [10.0, 20.0, 10.0, 10.0], [15.0, 15.0, 10.0, 10.0],
    )
    res = run_ensemble(s, small_cfg(x_shock=0.0, p=0.5, p_shock=0.5))
    share = -10.0 / (10.0 - 10.0 + 20.0 + 30.0)
    assert res.mean_H_inf == pytest.approx(share, abs=1e-15)
    assert res.stderr_H_inf == 0.0


def test_no_interbank_exposure_gives_initial_loss():
    n = 6
    assets = np.linspace(100, 200, n)
    s = BankingSystem.from_arrays(assets, 0.9 * assets, np.r_[1e-9, np.zeros(n - 1)],
                                  np.r_[0.0, 1e-9, np.zeros(n - 2)])
    res = run_ensemble(s, small_cfg(p=1 / 30, p_shock=0.5, x_shock=0.01))
    assert res.mean_H_inf == pytest.approx(res.mean_H_initial, rel=1e-6)


def test_ensemble_shapes_and_stderr(synth):
    res = run_ensemble(synth, small_cfg())
    assert res.n_runs == 12 and res.n_nonconverged == 0 and res.n_failed == 0
    assert len(res.mean_H_t) == len(res.mean_S_t) == len(res.stderr_D_t)
    assert res.mean_H_t[-1] == pytest.approx(res.mean_H_inf)
    assert res.stderr_H_inf == pytest.approx(np.std(res.H_inf, ddof=1) / math.sqrt(12))
    assert np.all(np.diff(res.mean_D_t) >= -1e-15)


def test_ensemble_bitwise_deterministic(synth):
    a = run_ensemble(synth, small_cfg())
    b = run_ensemble(synth, small_cfg())
    assert a.mean_H_inf == b.mean_H_inf
    np.testing.assert_array_equal(a.mean_H_t, b.mean_H_t)
    np.testing.assert_array_equal(a.H_inf, b.H_inf)


def test_paired_rule_ordering(synth):
    ens = build_ensemble(synth, small_cfg(x_shock=0.02))
    fur = run_ensemble(synth, small_cfg(rule=PropagationRule.furfine(), x_shock=0.02), ens)
    non = run_ensemble(synth, small_cfg(rule=PropagationRule.nonlinear(1.5), x_shock=0.02), ens)
    lin = run_ensemble(synth, small_cfg(rule=PropagationRule.linear(), x_shock=0.02), ens)
    assert np.all(fur.H_inf <= non.H_inf + 1e-9)
    assert np.all(non.H_inf <= lin.H_inf + 1e-9)


def test_stderr_halves_when_runs_quadruple():
    s = generate_synthetic(80, seed=12)
    cfg = small_cfg(p=0.1, n_shock_realizations=2, p_shock=0.1, x_shock=0.01,
                    rule=PropagationRule.nonlinear(2.5))
    small = run_ensemble(s, ScenarioConfig(**{**cfg.__dict__, "n_networks": 25}))
    large = run_ensemble(s, ScenarioConfig(**{**cfg.__dict__, "n_networks": 100}))
    ratio = small.stderr_H_inf / large.stderr_H_inf
    # std-of-stderr for ~50 runs is ~10%: a 3-sigma band around 2
    assert 2 * (1 - 0.3) < ratio < 2 * (1 + 0.3)


def test_sweep_single_cell_matches_run(synth):
    cfg = small_cfg()
    sw = sweep_H_surface(synth, cfg, [1.0], [0.005])
    assert len(sw.cells) == 1
    assert sw.cells[0].mean_H_inf == run_ensemble(synth, cfg).mean_H_inf


def test_sweep_null_cell(synth):
    sw = sweep_H_surface(synth, small_cfg(), [0.0], [0.0])
    assert sw.cells[0].mean_H_inf == 0.0


def test_sweep_grid_and_monotonicity(synth):
    alphas, xs = [0.0, 1.0, 2.0, 4.0], [0.002, 0.01, 0.03]
    sw = sweep_H_surface(synth, small_cfg(), alphas, xs)
    mean, err = sw.surface()
    assert mean.shape == (4, 3) and len(sw.cells) == 12
    slack = 2 * np.maximum(err[1:], err[:-1])
    assert np.all(mean[1:] <= mean[:-1] + slack)
    slack = 2 * np.maximum(err[:, 1:], err[:, :-1])
    assert np.all(mean[:, :-1] <= mean[:, 1:] + slack)


def test_sweep_requires_grids(synth):
    with pytest.raises(ConfigError):
        sweep_H_surface(synth, small_cfg(), [], [0.1])

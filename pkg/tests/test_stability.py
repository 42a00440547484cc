import math

import numpy as np
import pytest

from nldebtrank import PropagationRule, simulate, spectral_radius, stability_assessment
from nldebtrank.balance import LeverageMatrix


def dense_radius(m):
    return float(np.max(np.abs(np.linalg.eigvals(m))))


@pytest.mark.parametrize("a,b", [(1, 4), (2, 2), (0.3, 5)])
def test_two_cycle_analytic(a, b):
    rep = spectral_radius(np.array([[0, a], [b, 0]], float))
    assert rep.lambda_max == pytest.approx(math.sqrt(a * b), abs=1e-8)
    assert rep.converged


def test_zero_and_nilpotent_matrices():
    assert spectral_radius(np.zeros((3, 3))).lambda_max == 0.0
    rep = spectral_radius(np.array([[0, 0.5], [0, 0]]))
    assert rep.lambda_max == 0.0
    assert rep.alpha_critical == -math.inf
    assert rep.is_stable_at(0.0)


def test_accepts_leverage_matrix():
    lev = LeverageMatrix.from_matrix([[0, 1.0], [4.0, 0]])
    assert spectral_radius(lev).lambda_max == pytest.approx(2.0, abs=1e-8)


@pytest.mark.parametrize("seed", range(20))
def test_against_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 21))
    m = rng.random((n, n)) * (rng.random((n, n)) < rng.uniform(0.1, 1.0))
    np.fill_diagonal(m, 0)
    assert spectral_radius(m).lambda_max == pytest.approx(dense_radius(m), abs=1e-8)


def test_reducible_block_structure():
    m = np.zeros((5, 5))
    m[0, 1], m[1, 0] = 1.0, 9.0     # block radius 3
    m[2, 3], m[3, 4], m[4, 2] = 2.0, 2.0, 2.0   # 3-cycle, radius 2
    m[1, 2] = 7.0                    # coupling between blocks does not matter
    assert spectral_radius(m).lambda_max == pytest.approx(3.0, abs=1e-9)


def test_monotone_under_elementwise_increase():
    rng = np.random.default_rng(3)
    m = rng.random((10, 10))
    np.fill_diagonal(m, 0)
    vals = [spectral_radius(c * m).lambda_max for c in (0.5, 1.0, 1.5, 3.0)]
    assert vals == sorted(vals)


def test_nonconvergence_flagged():
    rep = spectral_radius(np.array([[0, 1.0], [4.0, 0]]), max_iter=2)
    assert not rep.converged and rep.iterations == 2


def test_assessment_examples():
    assert stability_assessment(2.0, 1.0) == "stable"
    assert stability_assessment(2.0, 0.0) == "unstable"
    for alpha in (0.0, 0.1, 5.0):
        assert stability_assessment(0.5, alpha) == "stable"
    assert stability_assessment(2.0, math.log(2.0)) == "marginal"
    assert stability_assessment(0.0, 0.0) == "stable"


def ring(n, weight):
    lam = np.zeros((n, n))
    lam[np.arange(n), (np.arange(n) + 1) % n] = weight
    return lam


@pytest.mark.parametrize("offset", [0.1, 0.3])
def test_small_shock_amplification_switches_at_log_lambda(offset):
    lam = ring(8, 2.0)
    assert spectral_radius(lam).lambda_max == pytest.approx(2.0, abs=1e-9)
    h1 = np.full(8, 1e-6)
    stable = simulate(h1, lam, PropagationRule.nonlinear(math.log(2) + offset))
    unstable = simulate(h1, lam, PropagationRule.nonlinear(math.log(2) - offset))
    # linear response of a uniform shock on the ring: 1 / (1 - 2 exp(-alpha))
    assert stable.H_inf / stable.H_initial == pytest.approx(1 / (1 - math.exp(-offset)), rel=1e-4)
    assert unstable.H_inf / unstable.H_initial > 100
    assert unstable.H_inf == 1.0


def test_amplification_bounded_with_margin():
    h1 = np.full(8, 1e-6)
    stable = simulate(h1, ring(8, 2.0), PropagationRule.nonlinear(math.log(2) + 0.3))
    assert stable.H_inf / stable.H_initial < 10

import math

import numpy as np
import pytest

from annrr import ConfigurationError
from annrr.linalg import singular_values
from annrr.simulation import SimulationScenario
from annrr.thresholding import adaptive_nuclear_norm
from annrr import theory
from annrr.theory import (
    FAIL, PASS, SKIP, TheoryCheckConfig, check_asvt_optimality, check_convexity_dichotomy, check_noise_spectrum,
    check_prediction_bound, check_svt_solutions, check_rank_consistency, counterexample_pair, midpoint_excess,
)

from conftest import make_rng


def test_config_ranges():
    TheoryCheckConfig().validate()
    for bad in (dict(delta=0.0), dict(delta=1.5), dict(theta=0.0), dict(a=1.0), dict(M=0.0), dict(gamma=-1.0), dict(trials=0)):
        with pytest.raises(ConfigurationError):
            TheoryCheckConfig(**bad).validate()


def test_counterexample_two_by_two():
    c1, c2 = np.diag([2.0, 1.0]), np.diag([1.0, 2.0])
    w = np.array([1.0, 2.0])
    excess = adaptive_nuclear_norm(0.5 * (c1 + c2), w) - 0.5 * (adaptive_nuclear_norm(c1, w) + adaptive_nuclear_norm(c2, w))
    assert excess == pytest.approx(0.5, abs=1e-12)
    c, d = counterexample_pair(2, 1)
    np.testing.assert_array_equal(c, np.diag([1.0, 2.0]))
    np.testing.assert_array_equal(d, np.diag([2.0, 1.0]))


@pytest.mark.parametrize("h,k", [(3, 1), (3, 2), (5, 2), (5, 4)])
def test_counterexample_excess_formula(h, k):
    r = make_rng(h * 10 + k)
    w = -np.sort(-r.uniform(0, 2, h))
    w[k] = w[k - 1] + 0.7
    c, d = counterexample_pair(h, k)
    got = midpoint_excess(c[None], d[None], w)[0]
    assert got == pytest.approx(0.5 * (w[k] - w[k - 1]), abs=1e-9)


def test_non_increasing_weights_are_convex():
    r = make_rng(0)
    a, b = r.standard_normal((2, 10_000, 2, 2))
    assert np.max(midpoint_excess(a, b, np.array([2.0, 1.0]))) <= 1e-9


def test_convexity_check_passes_and_records_example():
    rep = check_convexity_dichotomy(h=3, trials=2000, seed=1)
    assert rep.status == PASS
    ex = rep.details["two_by_two_example"]
    assert (ex["f_C1"], ex["f_C2"], ex["f_minus_C2"], ex["f_mid"]) == pytest.approx((4.0, 4.0, 4.0, 4.5))
    with pytest.raises(ConfigurationError):
        check_convexity_dichotomy(h=1)


def test_optimality_checks_small_runs():
    assert check_asvt_optimality(instances=20, seed=3, perturbations=2000).status == PASS
    assert check_svt_solutions(instances=30, seed=3).status == PASS


def test_noise_spectrum_trivial_and_identity_cases():
    zero = check_noise_spectrum(sigma=0.0, trials=20)
    assert zero.status == PASS and zero.empirical == 0.0
    # r_x = n: P = I, so d1(PE) is the spectral norm of a Gaussian matrix
    rep = check_noise_spectrum(n=15, q=10, r_x=15, trials=200, seed=4)
    assert rep.status == PASS
    assert rep.empirical <= math.sqrt(15) + math.sqrt(10)


def test_rank_consistency_near_noiseless_and_skip():
    s = theory.default_rank_scenario()
    quiet = SimulationScenario(**{**s.to_record(), "sigma": 1e-8})
    rep = check_rank_consistency(quiet, TheoryCheckConfig(trials=20))
    assert rep.status == PASS and rep.empirical == 1.0
    weak = SimulationScenario(**{**s.to_record(), "b": 1e-9})
    skipped = check_rank_consistency(weak, TheoryCheckConfig(trials=5, scale_signal=False))
    assert skipped.status == SKIP and "signal condition" in skipped.details["reason"]
    budget = check_rank_consistency(weak, TheoryCheckConfig(trials=5, b_max=1e-6))
    assert budget.status == SKIP


def test_rank_consistency_scales_signal_and_records_margin():
    s = SimulationScenario(**{**theory.default_rank_scenario().to_record(), "b": 0.01})
    rep = check_rank_consistency(s, TheoryCheckConfig(trials=10))
    assert rep.status == PASS
    assert rep.details["min_signal_margin"] > 1.0 and rep.details["max_b"] > 0.01
    assert rep.details["event_violations"] == 0


def test_prediction_bound_formulas():
    s = theory.default_bound_scenario()
    cfg = TheoryCheckConfig(delta=0.5, theta=1.0, gamma=2.0)
    noise = 4 * (math.sqrt(25) + math.sqrt(25)) ** 2
    inner = math.sqrt(2) + 2 * 1.5**-2 / 0.5 - (2 * 3 + 0.5) ** -2 / 0.5
    assert theory.adaptive_prediction_bound(s, cfg, 3.0) == pytest.approx(4 * inner**2 * noise * 5)
    assert theory.fixed_weight_prediction_bound(s, cfg, 1.0) == pytest.approx(4 * (math.sqrt(2) + 4 - 2) ** 2 * noise * 5)


def test_prediction_bound_checks():
    s = theory.default_bound_scenario()
    quiet = SimulationScenario(**{**s.to_record(), "sigma": 1e-8})
    rep = check_prediction_bound(quiet, TheoryCheckConfig(trials=10))
    assert rep.status == PASS and rep.details["max_lhs"] < 1e-10
    fixed = check_prediction_bound(s, TheoryCheckConfig(trials=20), fixed_weights=np.ones(25))
    assert fixed.status == PASS and fixed.name.endswith("fixed-weights")
    bad = check_prediction_bound(s, TheoryCheckConfig(trials=5), fixed_weights=np.full(25, 2.0))
    assert bad.status == SKIP


def test_reports_are_deterministic_and_serializable():
    a = check_noise_spectrum(trials=50, seed=7).to_record()
    b = check_noise_spectrum(trials=50, seed=7).to_record()
    assert a == b
    assert set(a) == {"name", "status", "claimed", "empirical", "slack", "details"}

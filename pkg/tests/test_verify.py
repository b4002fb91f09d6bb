"""Brute-force oracle behavior: empirical slots, coverage, worst-case loss,
robust-minimizer grid search, and degeneration metrics."""

import math

import numpy as np
import pytest

from rqiqn.envs.chain import true_return_quantiles, true_return_std
from rqiqn.metrics import degeneration_report
from rqiqn.robust import delta_raw
from rqiqn.verify import (
    DroOracleConfig,
    EmpiricalTargetLaw,
    coverage_condition,
    default_oracle_grid,
    dro_robust_minimizer_bruteforce,
    dro_worst_case_loss,
    empirical_check_objective,
    empirical_quantile_slot,
    invariant_suite,
)


def test_slot_sample_median():
    law = EmpiricalTargetLaw([1.0, 2.0, 3.0])
    assert empirical_quantile_slot(law, 0.5) == 2.0


def test_slot_order_statistic():
    law = EmpiricalTargetLaw([1.0, 2.0, 3.0])
    assert empirical_quantile_slot(law, 0.9) == 3.0


def test_slot_interval_lower_endpoint():
    law = EmpiricalTargetLaw([0.0, 10.0])
    assert empirical_quantile_slot(law, 0.5) == 0.0


def test_slot_rejects_empty_law():
    with pytest.raises(ValueError):
        EmpiricalTargetLaw([])


def test_slot_coverage_random_laws():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        m = int(rng.integers(1, 51))
        law = EmpiricalTargetLaw(rng.normal(0, 3, size=m))
        tau = float(rng.uniform(0.01, 0.99))
        q0 = empirical_quantile_slot(law, tau)
        assert coverage_condition(law, q0, tau)


def test_slot_minimizes_objective():
    rng = np.random.default_rng(1)
    for _ in range(100):
        law = EmpiricalTargetLaw(rng.normal(0, 2, size=int(rng.integers(1, 20))))
        tau = float(rng.uniform(0.05, 0.95))
        q0 = empirical_quantile_slot(law, tau)
        grid = np.linspace(law.samples.min() - 1, law.samples.max() + 1, 2001)
        objective = empirical_check_objective(law, grid, tau)
        assert empirical_check_objective(law, q0, tau) <= objective.min() + 1e-10


def test_worst_case_zero_radius_is_plain_loss():
    law = EmpiricalTargetLaw([-1.0, 0.5, 2.0])
    for q in (-0.5, 0.0, 1.5):
        assert dro_worst_case_loss(law, q, 0.3, 0.0) == pytest.approx(
            empirical_check_objective(law, q, 0.3)
        )


def test_worst_case_single_atom():
    law = EmpiricalTargetLaw([0.0])
    assert dro_worst_case_loss(law, 0.0, 0.75, 1.0) == pytest.approx(0.75)


def test_worst_case_convex_in_q():
    law = EmpiricalTargetLaw([-1.0, 0.0, 2.5])
    qs = np.linspace(-4, 6, 401)
    vals = np.array([dro_worst_case_loss(law, q, 0.4, 0.7) for q in qs])
    second_diff = np.diff(vals, 2)
    assert np.all(second_diff >= -1e-9)


def test_worst_case_nested_in_radius():
    rng = np.random.default_rng(2)
    law = EmpiricalTargetLaw(rng.normal(0, 2, size=6))
    qs = np.linspace(-5, 5, 101)
    for q in qs:
        small = dro_worst_case_loss(law, q, 0.35, 0.2)
        large = dro_worst_case_loss(law, q, 0.35, 1.1)
        assert large >= small - 1e-12


def test_worst_case_finite_p_unsupported():
    law = EmpiricalTargetLaw([0.0])
    with pytest.raises(NotImplementedError):
        dro_worst_case_loss(law, 0.0, 0.5, 1.0, p=2.0)
    with pytest.raises(NotImplementedError):
        dro_robust_minimizer_bruteforce(law, 0.5, 1.0, p=2.0)


def test_bruteforce_single_atom_balance_point():
    law = EmpiricalTargetLaw([0.0])
    q = dro_robust_minimizer_bruteforce(law, 0.75, 1.0)
    assert q == pytest.approx(0.5, abs=1e-3)


def test_bruteforce_zero_radius_matches_slot():
    rng = np.random.default_rng(3)
    for _ in range(10):
        law = EmpiricalTargetLaw(rng.uniform(-2, 2, size=int(rng.integers(1, 8))))
        tau = float(rng.uniform(0.15, 0.85))
        q = dro_robust_minimizer_bruteforce(law, tau, 0.0)
        assert q == pytest.approx(empirical_quantile_slot(law, tau), abs=1e-3)


def test_bruteforce_agrees_with_closed_form():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        m = int(rng.integers(1, 11))
        law = EmpiricalTargetLaw(rng.uniform(-3, 3, size=m))
        tau = float(rng.uniform(0.1, 0.9))
        eps = float(rng.uniform(0.0, 2.0))
        q_brute = dro_robust_minimizer_bruteforce(law, tau, eps)
        q_closed = empirical_quantile_slot(law, tau) + delta_raw(tau, eps, math.inf)
        worst = max(worst, abs(q_brute - q_closed))
    assert worst <= 1e-3


def test_grid_too_coarse_raises():
    law = EmpiricalTargetLaw([0.0, 1.0])
    cfg = DroOracleConfig(lo=-3.0, hi=4.0, resolution=0.05)
    with pytest.raises(ValueError):
        dro_robust_minimizer_bruteforce(law, 0.5, 0.5, cfg, tolerance=1e-3)


def test_default_grid_spans_samples_with_margin():
    law = EmpiricalTargetLaw([-2.0, 3.0])
    grid = default_oracle_grid(law, 1.5)
    assert grid.lo <= -2.0 - 1.5 - 1.0 + 1e-12
    assert grid.hi >= 3.0 + 1.5 + 1.0 - 1e-12


def test_oracle_config_validation():
    with pytest.raises(ValueError):
        DroOracleConfig(lo=0.0, hi=1.0, resolution=0.0)
    with pytest.raises(ValueError):
        DroOracleConfig(lo=2.0, hi=1.0)


# -- degeneration metrics ------------------------------------------------------


def test_degeneration_gap_zero_for_oracle():
    gamma = 0.99
    report = degeneration_report(lambda s, taus: true_return_quantiles(s, gamma, taus), gamma)
    for s in (0, 1, 2):
        assert report["states"][s]["gap"] == 0.0


def test_degeneration_constant_network_gap_equals_true_std():
    gamma = 0.99
    report = degeneration_report(lambda s, taus: np.zeros_like(taus), gamma)
    for s in (0, 1, 2):
        entry = report["states"][s]
        assert entry["std"] == 0.0
        assert entry["gap"] == entry["true_grid_std"]


def test_state_zero_true_std_value():
    assert true_return_std(0, 0.99) == pytest.approx(0.99**2 * math.sqrt(5.0), rel=1e-12)
    assert true_return_std(0, 0.99) == pytest.approx(2.1916, abs=5e-5)


def test_invariant_suite_passes():
    results = invariant_suite(fast=True)
    for r in results:
        assert r.passed, f"{r.name}: {r.detail}"

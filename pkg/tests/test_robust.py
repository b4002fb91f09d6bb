"""Robust quantile correction formulas, radius schedule, and distortions."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from rqiqn.robust import (
    DistortionConfig,
    RobustConfig,
    WassersteinSlot,
    adaptive_eta,
    c_tau_p,
    correction,
    delta_bounded_2,
    delta_raw,
    distort_fraction,
    epsilon_schedule,
)


def random_dyadic(rng, n, power=20):
    """Random fractions whose complements 1 - tau are exact in binary."""
    return rng.integers(1, 2**power, size=n) / float(2**power)


def test_c_tau_infinity_at_median():
    assert c_tau_p(0.5, math.inf) == pytest.approx(0.5)


def test_c_tau_two_at_median():
    assert c_tau_p(0.5, 2.0) == pytest.approx(0.5)


def test_c_tau_two_collapses_to_sqrt_form():
    rng = np.random.default_rng(0)
    taus = rng.uniform(0.01, 0.99, size=20)
    assert np.allclose(c_tau_p(taus, 2.0), np.sqrt(taus * (1 - taus)), rtol=1e-12)


def test_c_tau_domain_error():
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            c_tau_p(bad, 2.0)


def test_delta_zero_at_median_all_variants():
    for fn in (
        lambda t: delta_raw(t, 1.0, math.inf),
        lambda t: delta_raw(t, 1.0, 2.0),
        lambda t: delta_bounded_2(t, 1.0),
    ):
        assert fn(0.5) == 0.0


def test_delta_raw_infinity_value():
    assert delta_raw(0.75, 1.0, math.inf) == pytest.approx(0.5)


def test_delta_raw_two_value():
    assert delta_raw(0.9, 1.0, 2.0) == pytest.approx(4.0 / 3.0)


def test_delta_bounded_endpoints():
    assert delta_bounded_2(0.0, 1.0) == pytest.approx(0.5)
    assert delta_bounded_2(1.0, 1.0) == pytest.approx(-0.5)


def test_delta_bounded_quarter():
    assert delta_bounded_2(0.25, 2.0) == pytest.approx(0.5 / math.sqrt(0.625))


def test_delta_raw_rejects_endpoints():
    with pytest.raises(ValueError):
        delta_raw(0.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        delta_raw(1.0, 1.0, math.inf)


def test_median_antisymmetry_random_fractions():
    rng = np.random.default_rng(1)
    taus = random_dyadic(rng, 1000)
    for eps in (0.1, 1.0, 10.0):
        for fn in (
            lambda t, e=eps: delta_raw(t, e, math.inf),
            lambda t, e=eps: delta_raw(t, e, 2.0),
            lambda t, e=eps: delta_bounded_2(t, e),
        ):
            assert np.max(np.abs(fn(1.0 - taus) + fn(taus))) <= 1e-12


def test_zero_quadrature_mean():
    for fn in (lambda t: delta_raw(t, 1.0, math.inf), lambda t: delta_bounded_2(t, 1.0)):
        val, _ = quad(fn, 1e-12, 1.0 - 1e-12, limit=200)
        assert abs(val) <= 1e-8


def test_monotonicity_on_dense_grid():
    taus = np.linspace(1e-4, 1 - 1e-4, 10_000)
    for eps in (0.1, 1.0, 10.0):
        assert np.all(np.diff(delta_raw(taus, eps, math.inf)) >= 0)
        assert np.all(np.diff(delta_bounded_2(taus, eps)) <= 0)


def test_radius_scaling():
    rng = np.random.default_rng(2)
    taus = rng.uniform(0.01, 0.99, size=200)
    for c in (0.0, 0.5, 3.0):
        assert np.allclose(delta_raw(taus, c * 1.7, math.inf), c * delta_raw(taus, 1.7, math.inf), rtol=1e-12)
        assert np.allclose(delta_bounded_2(taus, c * 1.7), c * delta_bounded_2(taus, 1.7), rtol=1e-12)


def test_zero_radius_annihilates_exactly():
    taus = np.linspace(0.001, 0.999, 999)
    assert np.all(delta_raw(taus, 0.0, math.inf) == 0.0)
    assert np.all(delta_raw(taus, 0.0, 2.0) == 0.0)
    assert np.all(delta_bounded_2(taus, 0.0) == 0.0)


def test_magnitude_bounds():
    taus = np.linspace(1e-6, 1 - 1e-6, 5001)
    for eps in (0.1, 1.0, 10.0):
        assert np.max(np.abs(delta_raw(taus, eps, math.inf))) <= eps
        assert np.max(np.abs(delta_bounded_2(np.linspace(0, 1, 5001), eps))) <= eps / 2


def test_correction_dispatch():
    tau = 0.3
    assert correction(tau, 1.0, RobustConfig(order="infinity", variant="raw")) == delta_raw(tau, 1.0, math.inf)
    assert correction(tau, 1.0, RobustConfig(order="two", variant="bounded")) == delta_bounded_2(tau, 1.0)
    assert correction(tau, 1.0, RobustConfig(order="two", variant="raw")) == delta_raw(tau, 1.0, 2.0)


def test_robust_config_validation():
    with pytest.raises(ValueError):
        RobustConfig(order="infinity", variant="bounded")
    with pytest.raises(ValueError):
        RobustConfig(epsilon0=-1.0)
    with pytest.raises(ValueError):
        RobustConfig(k=0.0)
    with pytest.raises(ValueError):
        RobustConfig(t0=-5)


def test_wasserstein_slot_conjugate():
    assert WassersteinSlot(0.3, 1.0, 2.0).q == pytest.approx(2.0)
    assert WassersteinSlot(0.3, 1.0, 3.0).q == pytest.approx(1.5)
    assert WassersteinSlot(0.3, 1.0, math.inf).q == 1.0
    with pytest.raises(ValueError):
        WassersteinSlot(0.0, 1.0, 2.0)


def test_schedule_midpoint_is_exactly_half():
    cfg = RobustConfig(epsilon0=0.8, k=1e-3, t0=5000)
    assert epsilon_schedule(5000, cfg) == 0.4


def test_schedule_paper_constants_at_step_zero():
    cfg = RobustConfig(epsilon0=1.0, k=1.2e-6, t0=3.75e6)
    assert epsilon_schedule(0, cfg) == pytest.approx(0.98901, abs=1e-5)


def test_schedule_tail_vanishes():
    cfg = RobustConfig(epsilon0=1.0, k=1e-3, t0=0.0)
    assert epsilon_schedule(15_000, cfg) < 1e-6


def test_schedule_strictly_decreasing():
    cfg = RobustConfig(epsilon0=2.0, k=7e-4, t0=2500)
    vals = epsilon_schedule(np.arange(0, 30_000, 11), cfg)
    assert np.all(np.diff(vals) < 0)


def test_distortion_identity():
    assert distort_fraction(0.7, DistortionConfig()) == 0.7


def test_distortion_cvar():
    assert distort_fraction(0.8, DistortionConfig(kind="cvar", eta=0.25)) == pytest.approx(0.2)


def test_distortion_adaptive_clamps_to_one_at_safe_distance():
    cfg = DistortionConfig(kind="adaptive-cvar", d_safe=5.0, eta_min=0.25)
    assert distort_fraction(0.5, cfg, obstacle_distance=5.0) == pytest.approx(0.5)


def test_distortion_adaptive_floor():
    cfg = DistortionConfig(kind="adaptive-cvar", d_safe=5.0, eta_min=0.25)
    assert adaptive_eta(0.0, cfg) == 0.25
    assert distort_fraction(0.4, cfg, obstacle_distance=0.5) == pytest.approx(0.25 * 0.4)


def test_distortion_adaptive_requires_context():
    cfg = DistortionConfig(kind="adaptive-cvar")
    with pytest.raises(ValueError):
        distort_fraction(0.5, cfg)


def test_distortion_config_validation():
    with pytest.raises(ValueError):
        DistortionConfig(kind="cvar", eta=0.0)
    with pytest.raises(ValueError):
        DistortionConfig(eta_min=1.5)
    with pytest.raises(ValueError):
        DistortionConfig(d_safe=0.0)

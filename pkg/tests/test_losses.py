"""Check loss, Huber kernel, quantile Huber, and pairwise aggregation."""

import numpy as np
import pytest

from rqiqn.autodiff import Tensor, tsum
from rqiqn.losses import (
    LossConfig,
    TDErrorMatrix,
    aggregate_loss,
    check_loss,
    elementwise_loss_graph,
    huber_kernel,
    quantile_huber,
)


def test_check_loss_positive_residual():
    assert check_loss(1.0, 0.5) == pytest.approx(0.5)


def test_check_loss_negative_residual():
    assert check_loss(-1.0, 0.25) == pytest.approx(0.75)


def test_check_loss_zero_residual():
    for tau in (0.1, 0.5, 0.9):
        assert check_loss(0.0, tau) == 0.0


def test_check_loss_alternate_form():
    rng = np.random.default_rng(0)
    u = rng.normal(0, 3, size=500)
    tau = rng.uniform(0.01, 0.99, size=500)
    assert np.allclose(check_loss(u, tau), np.abs(tau - (u < 0)) * np.abs(u), atol=1e-15)


def test_huber_kernel_quadratic_region():
    assert huber_kernel(0.5, 1.0) == pytest.approx(0.125)


def test_huber_kernel_linear_region():
    assert huber_kernel(2.0, 1.0) == pytest.approx(1.5)


def test_huber_kernel_boundary_continuity():
    for kappa in (0.3, 1.0, 2.5):
        assert huber_kernel(-kappa, kappa) == pytest.approx(0.5 * kappa**2)


def test_huber_kernel_rejects_nonpositive_threshold():
    with pytest.raises(ValueError):
        huber_kernel(1.0, 0.0)


def test_quantile_huber_values():
    assert quantile_huber(2.0, 0.5, 1.0) == pytest.approx(0.75)
    assert quantile_huber(-2.0, 0.25, 1.0) == pytest.approx(1.125)
    assert quantile_huber(0.5, 0.9, 1.0) == pytest.approx(0.1125)


def test_quantile_huber_kernel_relation():
    rng = np.random.default_rng(1)
    u = rng.normal(0, 2, size=400)
    u = u[u != 0]
    tau = rng.uniform(0.05, 0.95, size=u.size)
    kappa = 0.8
    weight = np.abs(tau - (u < 0))
    assert np.allclose(
        quantile_huber(u, tau, kappa) * kappa / weight, huber_kernel(u, kappa), rtol=1e-12
    )


def test_quantile_huber_approaches_check_loss():
    kappa = 1e-6
    rng = np.random.default_rng(2)
    u = rng.normal(0, 3, size=1000)
    u = u[np.abs(u) >= kappa]
    tau = rng.uniform(0.01, 0.99, size=u.size)
    gap = np.abs(quantile_huber(u, tau, kappa) - check_loss(u, tau))
    assert np.all(gap <= kappa / 2 + 1e-18)


def test_loss_config_validation():
    with pytest.raises(ValueError):
        LossConfig("quantile-huber", kappa=0.0)
    with pytest.raises(ValueError):
        LossConfig("squared")


def test_aggregate_single_entry():
    m = TDErrorMatrix(delta=[[0.9]], taus_current=[0.5], taus_target=[0.5])
    assert aggregate_loss(m, LossConfig("check")) == pytest.approx(0.45)


def test_aggregate_zero_matrix():
    m = TDErrorMatrix(delta=np.zeros((3, 4)), taus_current=[0.2, 0.5, 0.8], taus_target=[0.1] * 4)
    assert aggregate_loss(m, LossConfig("check")) == 0.0


def test_aggregate_two_by_two():
    m = TDErrorMatrix(delta=np.ones((2, 2)), taus_current=[0.25, 0.75], taus_target=[0.4, 0.6])
    assert aggregate_loss(m, LossConfig("check")) == pytest.approx(1.0)


def test_aggregate_positive_homogeneity():
    rng = np.random.default_rng(3)
    delta = rng.normal(0, 2, size=(4, 6))
    m1 = TDErrorMatrix(delta, rng.uniform(0.1, 0.9, 4), rng.uniform(0.1, 0.9, 6))
    for c in (0.5, 2.0, 7.3):
        m2 = TDErrorMatrix(c * m1.delta, m1.taus_current, m1.taus_target)
        assert aggregate_loss(m2, LossConfig("check")) == pytest.approx(
            c * aggregate_loss(m1, LossConfig("check")), rel=1e-12
        )


def test_td_matrix_validation():
    with pytest.raises(ValueError):
        TDErrorMatrix(delta=np.zeros((0, 1)), taus_current=[], taus_target=[0.5])
    with pytest.raises(ValueError):
        TDErrorMatrix(delta=np.zeros((1, 1)), taus_current=[0.0], taus_target=[0.5])
    with pytest.raises(ValueError):
        TDErrorMatrix(delta=np.zeros((2, 2)), taus_current=[0.5], taus_target=[0.5, 0.5])


@pytest.mark.parametrize("variant,kappa", [("check", 1.0), ("quantile-huber", 1.0), ("quantile-huber", 0.3)])
def test_graph_loss_matches_pure_aggregation(variant, kappa):
    rng = np.random.default_rng(4)
    delta = rng.normal(0, 2, size=(5, 7))
    taus = rng.uniform(0.05, 0.95, size=5)
    taus_target = rng.uniform(0.05, 0.95, size=7)
    cfg = LossConfig(variant, kappa)
    pure = aggregate_loss(TDErrorMatrix(delta, taus, taus_target), cfg)
    graph = tsum(elementwise_loss_graph(Tensor(delta), taus[:, None], cfg)) * (1.0 / 7)
    assert graph.item() == pytest.approx(pure, rel=1e-13)


def test_check_loss_subgradient_at_zero_is_tau():
    tau = 0.3
    delta = Tensor(np.zeros((1, 1)), requires_grad=True)
    out = tsum(elementwise_loss_graph(delta, np.array([[tau]]), LossConfig("check")))
    out.backward()
    assert delta.grad[0, 0] == pytest.approx(tau)


def test_graph_gradient_flows_through_residual_only():
    rng = np.random.default_rng(5)
    delta = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    taus = rng.uniform(0.1, 0.9, size=(3, 1))
    out = tsum(elementwise_loss_graph(delta, taus, LossConfig("check")))
    out.backward()
    expected = taus - (delta.values < 0)
    assert np.allclose(delta.grad, expected)

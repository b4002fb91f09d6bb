"""Quantile-regression losses: check loss, Huber kernel, quantile Huber,
and the pairwise TD-error aggregation used by the distributional agents.

Pure-numpy forms live alongside a graph builder (`elementwise_loss_graph`)
that produces the same values through the autodiff engine; the asymmetric
weight is always treated as constant in the residual, so the gradient at a
zero residual is the right derivative (tau for the check loss).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, huber as huber_op, mul

CHECK = "check"
QUANTILE_HUBER = "quantile-huber"


@dataclass(frozen=True)
class LossConfig:
    variant: str = CHECK
    kappa: float = 1.0

    def __post_init__(self):
        if self.variant not in (CHECK, QUANTILE_HUBER):
            raise ValueError(f"unknown loss variant {self.variant!r}")
        if self.variant == QUANTILE_HUBER and not self.kappa > 0:
            raise ValueError(f"quantile-huber requires kappa > 0, got {self.kappa}")


@dataclass
class TDErrorMatrix:
    """Pairwise TD residuals delta[i, j] with their current/target fractions."""

    delta: np.ndarray
    taus_current: np.ndarray
    taus_target: np.ndarray

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=np.float64)
        self.taus_current = np.asarray(self.taus_current, dtype=np.float64)
        self.taus_target = np.asarray(self.taus_target, dtype=np.float64)
        n, n_target = self.taus_current.size, self.taus_target.size
        if n < 1 or n_target < 1 or self.delta.shape != (n, n_target):
            raise ValueError(
                f"malformed TD matrix: delta {self.delta.shape}, "
                f"{n} current and {n_target} target fractions"
            )
        for taus in (self.taus_current, self.taus_target):
            if np.any(taus <= 0.0) or np.any(taus >= 1.0):
                raise ValueError("fractions must lie strictly inside (0, 1)")


def _maybe_scalar(x: np.ndarray, scalar: bool):
    return float(x) if scalar else x


def check_loss(u, tau):
    """rho_tau(u) = u * (tau - 1{u < 0}); u = 0 counts as nonnegative."""
    u_arr = np.asarray(u, dtype=np.float64)
    tau_arr = np.asarray(tau, dtype=np.float64)
    out = u_arr * (tau_arr - (u_arr < 0.0))
    return _maybe_scalar(out, np.isscalar(u) and np.isscalar(tau))


def huber_kernel(u, kappa: float):
    """u^2/2 inside |u| <= kappa, kappa*(|u| - kappa/2) outside."""
    if not kappa > 0:
        raise ValueError(f"Huber threshold must be positive, got {kappa}")
    u_arr = np.asarray(u, dtype=np.float64)
    absu = np.abs(u_arr)
    out = np.where(absu <= kappa, 0.5 * u_arr * u_arr, kappa * (absu - 0.5 * kappa))
    return _maybe_scalar(out, np.isscalar(u))


def quantile_huber(u, tau, kappa: float):
    """Asymmetric Huber: |tau - 1{u < 0}| * H_kappa(u) / kappa."""
    if not kappa > 0:
        raise ValueError(f"Huber threshold must be positive, got {kappa}")
    u_arr = np.asarray(u, dtype=np.float64)
    tau_arr = np.asarray(tau, dtype=np.float64)
    weight = np.abs(tau_arr - (u_arr < 0.0))
    out = weight * huber_kernel(u_arr, kappa) / kappa
    return _maybe_scalar(out, np.isscalar(u) and np.isscalar(tau))


def aggregate_loss(matrix: TDErrorMatrix, cfg: LossConfig) -> float:
    """(1/N') * sum_i sum_j rho_{tau_i}(delta_ij) for the configured variant."""
    taus = matrix.taus_current[:, None]
    if cfg.variant == CHECK:
        elem = check_loss(matrix.delta, taus)
    else:
        elem = quantile_huber(matrix.delta, taus, cfg.kappa)
    return float(elem.sum() / matrix.taus_target.size)


def elementwise_loss_graph(delta: Tensor, taus_current: np.ndarray, cfg: LossConfig) -> Tensor:
    """Differentiable elementwise loss on a residual tensor.

    `taus_current` must broadcast against `delta` (current fractions vary
    along the second-to-last axis). The indicator weight is computed from the
    residual values and held constant, so gradients flow through the residual
    only.
    """
    indicator = (delta.values < 0.0).astype(np.float64)
    if cfg.variant == CHECK:
        return mul(delta, taus_current - indicator)
    weight = np.abs(taus_current - indicator) / cfg.kappa
    return mul(huber_op(delta, cfg.kappa), weight)

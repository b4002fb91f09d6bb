"""Closed-form Wasserstein-robust quantile corrections, the decaying
robustness-radius schedule, and quantile-fraction distortions.

Two Wasserstein orders ship first-class: p = 2 and p = infinity. The raw
order-2 correction diverges at the fraction endpoints; the bounded variant
flips the endpoint behavior of the denominator and stays finite on [0, 1].
All correction functions are linear in the radius and vectorized over tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

ORDER_TWO = "two"
ORDER_INFINITY = "infinity"
VARIANT_RAW = "raw"
VARIANT_BOUNDED = "bounded"

IDENTITY = "identity"
CVAR = "cvar"
ADAPTIVE_CVAR = "adaptive-cvar"


@dataclass(frozen=True)
class RobustConfig:
    """Wasserstein order, radius decay schedule, and correction variant."""

    order: str = ORDER_TWO
    epsilon0: float = 0.0
    k: float = 1.0
    t0: float = 0.0
    variant: str = VARIANT_BOUNDED

    def __post_init__(self):
        if self.order not in (ORDER_TWO, ORDER_INFINITY):
            raise ValueError(f"unknown Wasserstein order {self.order!r}")
        if self.variant not in (VARIANT_RAW, VARIANT_BOUNDED):
            raise ValueError(f"unknown correction variant {self.variant!r}")
        if self.order == ORDER_INFINITY and self.variant == VARIANT_BOUNDED:
            raise ValueError("the bounded variant is only meaningful for order two")
        if self.epsilon0 < 0:
            raise ValueError(f"epsilon0 must be >= 0, got {self.epsilon0}")
        if not self.k > 0:
            raise ValueError(f"decay sharpness k must be > 0, got {self.k}")
        if self.t0 < 0:
            raise ValueError(f"decay midpoint t0 must be >= 0, got {self.t0}")


@dataclass(frozen=True)
class WassersteinSlot:
    """One robust quantile-estimation slot: fraction, radius, order, conjugate."""

    tau: float
    epsilon: float
    p: float

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"fraction must lie in (0, 1), got {self.tau}")
        if self.epsilon < 0:
            raise ValueError(f"radius must be >= 0, got {self.epsilon}")
        if not self.p > 1:
            raise ValueError(f"Wasserstein order must exceed 1, got {self.p}")

    @property
    def q(self) -> float:
        """Conjugate exponent: p/(p-1) for finite p, 1 for p = infinity."""
        return 1.0 if math.isinf(self.p) else self.p / (self.p - 1.0)


@dataclass(frozen=True)
class DistortionConfig:
    """Fraction distortion for risk-sensitive sampling."""

    kind: str = IDENTITY
    eta: float = 1.0
    d_safe: float = 5.0
    eta_min: float = 0.25

    def __post_init__(self):
        if self.kind not in (IDENTITY, CVAR, ADAPTIVE_CVAR):
            raise ValueError(f"unknown distortion kind {self.kind!r}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if not 0.0 < self.eta_min <= 1.0:
            raise ValueError(f"eta_min must lie in (0, 1], got {self.eta_min}")
        if not self.d_safe > 0:
            raise ValueError(f"d_safe must be > 0, got {self.d_safe}")


def _check_open_interval(tau: np.ndarray) -> None:
    if np.any(tau <= 0.0) or np.any(tau >= 1.0):
        raise ValueError("fraction must lie strictly inside (0, 1)")


def _conjugate(p: float) -> float:
    if math.isinf(p):
        return 1.0
    if not p > 1:
        raise ValueError(f"Wasserstein order must exceed 1, got {p}")
    return p / (p - 1.0)


def c_tau_p(tau, p: float):
    """Normalizer of the robust correction.

    2*tau*(1-tau) for p = infinity; (tau^q (1-tau) + tau (1-tau)^q)^(1/q)
    for finite p, which collapses to sqrt(tau*(1-tau)) at p = 2.
    """
    scalar = np.isscalar(tau)
    tau = np.asarray(tau, dtype=np.float64)
    _check_open_interval(tau)
    if math.isinf(p):
        out = 2.0 * tau * (1.0 - tau)
    else:
        q = _conjugate(p)
        out = (np.power(tau, q) * (1.0 - tau) + tau * np.power(1.0 - tau, q)) ** (1.0 / q)
    return float(out) if scalar else out


def delta_raw(tau, epsilon: float, p: float):
    """Signed location correction (eps/q)(tau^q - (1-tau)^q) * c_{tau,p}^(1-q).

    Reduces to eps*(2*tau - 1) at p = infinity; diverges toward the fraction
    endpoints for finite p, so callers must keep tau strictly inside (0, 1).
    """
    if epsilon < 0:
        raise ValueError(f"radius must be >= 0, got {epsilon}")
    scalar = np.isscalar(tau)
    tau = np.asarray(tau, dtype=np.float64)
    _check_open_interval(tau)
    if math.isinf(p):
        unit = tau - (1.0 - tau)
    else:
        q = _conjugate(p)
        unit = (np.power(tau, q) - np.power(1.0 - tau, q)) * c_tau_p(tau, p) ** (1.0 - q) / q
    out = epsilon * unit
    return float(out) if scalar else out


def delta_bounded_2(tau, epsilon: float):
    """Bounded order-2 correction (eps/2)(1 - 2*tau)/sqrt(tau^2 + (1-tau)^2).

    Finite on all of [0, 1], antisymmetric about the median, nonincreasing
    in tau, and bounded by eps/2 in magnitude.
    """
    if epsilon < 0:
        raise ValueError(f"radius must be >= 0, got {epsilon}")
    scalar = np.isscalar(tau)
    tau = np.asarray(tau, dtype=np.float64)
    if np.any(tau < 0.0) or np.any(tau > 1.0):
        raise ValueError("fraction must lie in [0, 1]")
    unit = 0.5 * (1.0 - 2.0 * tau) / np.sqrt(np.power(tau, 2) + np.power(1.0 - tau, 2))
    out = epsilon * unit
    return float(out) if scalar else out


def correction(tau, epsilon: float, cfg: RobustConfig):
    """Dispatch to the configured correction variant."""
    if cfg.order == ORDER_INFINITY:
        return delta_raw(tau, epsilon, math.inf)
    if cfg.variant == VARIANT_BOUNDED:
        return delta_bounded_2(tau, epsilon)
    return delta_raw(tau, epsilon, 2.0)


def epsilon_schedule(t, cfg: RobustConfig):
    """Reverse-logistic radius decay: eps_t = eps0 / (1 + exp(k*(t - t0)))."""
    scalar = np.isscalar(t)
    t = np.asarray(t, dtype=np.float64)
    out = cfg.epsilon0 * expit(-cfg.k * (t - cfg.t0))
    return float(out) if scalar else out


def adaptive_eta(distance: float, cfg: DistortionConfig) -> float:
    """CVaR threshold ramp: clamp(distance / d_safe, eta_min, 1)."""
    return float(np.clip(distance / cfg.d_safe, cfg.eta_min, 1.0))


def distort_fraction(tau, cfg: DistortionConfig, obstacle_distance: float | None = None):
    """Map uniform fractions through the configured distortion.

    identity -> tau; cvar -> eta * tau; adaptive-cvar -> eta(distance) * tau,
    which requires the nearest-obstacle distance as context.
    """
    scalar = np.isscalar(tau)
    tau = np.asarray(tau, dtype=np.float64)
    _check_open_interval(tau)
    if cfg.kind == IDENTITY:
        out = tau
    elif cfg.kind == CVAR:
        out = cfg.eta * tau
    else:
        if obstacle_distance is None:
            raise ValueError("adaptive-cvar distortion requires an obstacle-distance context")
        out = adaptive_eta(obstacle_distance, cfg) * tau
    return float(out) if scalar else out

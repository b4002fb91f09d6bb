"""Independent brute-force oracles and the fast invariant suite.

The oracles realize the worst-case side of the robust quantile estimation
problem directly: the empirical slot by order statistics, the infinity-order
worst case by per-atom endpoint perturbation, and the robust minimizer by
grid search. They never call the closed-form correction they are used to
validate.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import robust
from .losses import LossConfig, check_loss, elementwise_loss_graph, huber_kernel, quantile_huber


@dataclass
class EmpiricalTargetLaw:
    """Uniform discrete law over finitely many bootstrapped target values."""

    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.atleast_1d(np.asarray(self.samples, dtype=np.float64))
        if self.samples.size < 1:
            raise ValueError("empirical law needs at least one sample")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("empirical law samples must be finite")

    @property
    def size(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class DroOracleConfig:
    """Grid for the brute-force robust minimizer.

    `perturbation_resolution` is reserved for finite-order oracles, which are
    not shipped (the infinity-order case has an exact endpoint reduction).
    """

    lo: float
    hi: float
    resolution: float = 1e-3
    perturbation_resolution: float | None = None

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError(f"grid resolution must be > 0, got {self.resolution}")
        if not self.hi > self.lo:
            raise ValueError(f"empty grid [{self.lo}, {self.hi}]")


def empirical_quantile_slot(law: EmpiricalTargetLaw, tau: float) -> float:
    """Lower endpoint of the minimizers of E[rho_tau(Y - q)] under the law.

    For m samples this is the order statistic y_(ceil(tau*m)); when tau*m is
    an integer the minimizing set is an interval and the lower endpoint is
    returned.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {tau}")
    ys = np.sort(law.samples)
    k = math.ceil(tau * law.size)
    return float(ys[max(k, 1) - 1])


def coverage_condition(law: EmpiricalTargetLaw, q: float, tau: float) -> bool:
    """P(Y < q) <= tau <= P(Y <= q)."""
    below = float(np.mean(law.samples < q))
    at_most = float(np.mean(law.samples <= q))
    return below <= tau <= at_most


def empirical_check_objective(law: EmpiricalTargetLaw, q, tau: float):
    """(1/m) sum_j rho_tau(y_j - q); vectorized over q."""
    q = np.asarray(q, dtype=np.float64)
    u = law.samples[:, None] - np.atleast_1d(q)[None, :]
    vals = check_loss(u, tau).mean(axis=0)
    return float(vals[0]) if q.ndim == 0 else vals


def _worst_case_losses(law: EmpiricalTargetLaw, qs: np.ndarray, tau: float, epsilon: float) -> np.ndarray:
    """Infinity-order worst case at each q: every atom moves independently
    within [-eps, +eps]; the per-atom max of the piecewise-linear convex
    objective is attained at an interval endpoint."""
    y = law.samples[:, None]
    q = qs[None, :]
    lo = check_loss(y - epsilon - q, tau)
    hi = check_loss(y + epsilon - q, tau)
    return np.maximum(lo, hi).mean(axis=0)


def dro_worst_case_loss(law: EmpiricalTargetLaw, q: float, tau: float, epsilon: float, p: float = math.inf) -> float:
    if not math.isinf(p):
        raise NotImplementedError(
            "brute-force worst case ships for p = infinity only; finite p has no "
            "finite perturbation parameterization here"
        )
    if epsilon < 0:
        raise ValueError(f"radius must be >= 0, got {epsilon}")
    return float(_worst_case_losses(law, np.asarray([q], dtype=np.float64), tau, epsilon)[0])


def default_oracle_grid(law: EmpiricalTargetLaw, epsilon: float, resolution: float = 1e-3) -> DroOracleConfig:
    return DroOracleConfig(
        lo=float(law.samples.min() - epsilon - 1.0),
        hi=float(law.samples.max() + epsilon + 1.0),
        resolution=resolution,
    )


def dro_robust_minimizer_bruteforce(
    law: EmpiricalTargetLaw,
    tau: float,
    epsilon: float,
    cfg: DroOracleConfig | None = None,
    tolerance: float | None = None,
    p: float = math.inf,
) -> float:
    """Grid argmin of the worst-case loss; first (lowest) grid point on ties."""
    if not math.isinf(p):
        raise NotImplementedError("brute-force minimizer ships for p = infinity only")
    if cfg is None:
        cfg = default_oracle_grid(law, epsilon)
    if tolerance is not None and cfg.resolution > tolerance:
        raise ValueError(
            f"grid resolution {cfg.resolution} too coarse for requested tolerance {tolerance}"
        )
    n = int(math.floor((cfg.hi - cfg.lo) / cfg.resolution)) + 1
    qs = cfg.lo + cfg.resolution * np.arange(n)
    losses = _worst_case_losses(law, qs, tau, epsilon)
    return float(qs[int(np.argmin(losses))])


# -- fast invariant suite ------------------------------------------------------


@dataclass
class VerifyResult:
    name: str
    passed: bool
    detail: str
    elapsed_s: float


def _timed(fn):
    t0 = time.perf_counter()
    passed, detail = fn()
    return passed, detail, time.perf_counter() - t0


def dyadic_grid(power: int = 14) -> np.ndarray:
    """Fractions k / 2^power, k = 1 .. 2^power - 1; complements are exact."""
    denom = 2**power
    return np.arange(1, denom, dtype=np.float64) / denom


def check_correction_properties(radii=(0.1, 1.0, 10.0)) -> tuple[bool, str]:
    """Median antisymmetry, zero at the median, zero mean, monotonicity,
    radius linearity, annihilation at zero radius, and magnitude bounds for
    both shipped correction variants plus the raw order-2 form."""
    taus = dyadic_grid(14)  # 16383 grid points
    problems = []
    variants = {
        "raw-inf": lambda t, e: robust.delta_raw(t, e, math.inf),
        "raw-2": lambda t, e: robust.delta_raw(t, e, 2.0),
        "bounded-2": robust.delta_bounded_2,
    }
    for eps in radii:
        for name, fn in variants.items():
            d = fn(taus, eps)
            anti = np.max(np.abs(fn(1.0 - taus, eps) + d))
            if anti > 1e-12:
                problems.append(f"{name} eps={eps}: antisymmetry deviation {anti:.2e}")
            if fn(0.5, eps) != 0.0:
                problems.append(f"{name} eps={eps}: nonzero at the median")
            if np.any(fn(taus, 0.0) != 0.0):
                problems.append(f"{name}: radius 0 does not annihilate")
            two = fn(taus, 2.0 * eps)
            if not np.allclose(two, 2.0 * d, rtol=1e-12, atol=1e-300):
                problems.append(f"{name} eps={eps}: not linear in the radius")
        d_inf = variants["raw-inf"](taus, eps)
        if np.any(np.diff(d_inf) < 0):
            problems.append(f"raw-inf eps={eps}: not nondecreasing")
        if np.max(np.abs(d_inf)) > eps:
            problems.append(f"raw-inf eps={eps}: exceeds radius bound")
        d_b2 = variants["bounded-2"](taus, eps)
        if np.any(np.diff(d_b2) > 0):
            problems.append(f"bounded-2 eps={eps}: not nonincreasing")
        if np.max(np.abs(d_b2)) > eps / 2.0:
            problems.append(f"bounded-2 eps={eps}: exceeds eps/2 bound")
        for name in ("raw-inf", "bounded-2"):
            val, _ = quad(lambda t: variants[name](t, eps), 0.0 + 1e-12, 1.0 - 1e-12, limit=200)
            if abs(val) > 1e-8:
                problems.append(f"{name} eps={eps}: quadrature mean {val:.2e}")
    return not problems, "; ".join(problems) if problems else f"{taus.size} grid points, radii {radii}"


def check_slot_coverage(n_laws: int = 1000, seed: int = 20240, objective_subsample: int = 100) -> tuple[bool, str]:
    """Lemma-style coverage of the slot minimizer on random empirical laws,
    plus a direct objective-minimization cross-check on a subsample."""
    rng = np.random.default_rng(seed)
    violations = 0
    for i in range(n_laws):
        m = int(rng.integers(1, 51))
        law = EmpiricalTargetLaw(rng.normal(0.0, 3.0, size=m) + rng.uniform(-5, 5))
        tau = float(rng.uniform(0.01, 0.99))
        q0 = empirical_quantile_slot(law, tau)
        if not coverage_condition(law, q0, tau):
            violations += 1
            continue
        if i < objective_subsample:
            cand = np.unique(law.samples)
            obj = empirical_check_objective(law, cand, tau)
            best = cand[np.argmin(obj)]
            if empirical_check_objective(law, q0, tau) > np.min(obj) + 1e-12 or q0 > best + 1e-12:
                violations += 1
    return violations == 0, f"{n_laws} laws, {violations} violations"


def check_dro_equivalence(n_instances: int = 100, resolution: float = 1e-3, seed: int = 777) -> tuple[bool, str]:
    """Brute-force robust minimizer vs nominal slot + eps*(2*tau - 1)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        m = int(rng.integers(1, 11))
        law = EmpiricalTargetLaw(rng.uniform(-3.0, 3.0, size=m))
        tau = float(rng.uniform(0.1, 0.9))
        eps = float(rng.uniform(0.0, 2.0))
        grid = default_oracle_grid(law, eps, resolution)
        q_brute = dro_robust_minimizer_bruteforce(law, tau, eps, grid)
        q_closed = empirical_quantile_slot(law, tau) + robust.delta_raw(tau, eps, math.inf)
        worst = max(worst, abs(q_brute - q_closed))
    return worst <= resolution, f"{n_instances} instances, max |oracle - closed form| = {worst:.2e}"


def check_schedule() -> tuple[bool, str]:
    problems = []
    cfg = robust.RobustConfig(order="infinity", variant="raw", epsilon0=1.0, k=1.2e-6, t0=3.75e6)
    if robust.epsilon_schedule(cfg.t0, cfg) != cfg.epsilon0 / 2.0:
        problems.append("midpoint is not exactly eps0/2")
    start = robust.epsilon_schedule(0, cfg)
    if abs(start - 0.98901) > 1e-5:
        problems.append(f"start value {start:.6f} != 0.98901 +- 1e-5")
    ts = np.linspace(0.0, 8e6, 4001)
    vals = robust.epsilon_schedule(ts, cfg)
    if np.any(np.diff(vals) >= 0):
        problems.append("schedule is not strictly decreasing")
    cfg2 = robust.RobustConfig(epsilon0=2.5, k=3e-4, t0=1e4)
    steps = np.arange(0, 60_000, 7)
    vals2 = robust.epsilon_schedule(steps, cfg2)
    if np.any(np.diff(vals2) >= 0):
        problems.append("schedule is not strictly decreasing on the sampled step sequence")
    return not problems, "; ".join(problems) if problems else "midpoint exact, strictly decreasing"


def finite_difference_check(
    n_networks: int = 100, seed: int = 4321, h: float = 1e-5, tol: float = 1e-4
) -> tuple[bool, str]:
    """Analytic vs central finite-difference gradients of a quantile-Huber
    objective through randomly-sized quantile networks."""
    from .agents.networks import QuantileNetwork
    from .autodiff import Tensor, no_grad, pick, sub, tsum, zero_grads

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_networks):
        obs_dim = int(rng.integers(2, 6))
        n_actions = int(rng.integers(1, 4))
        width = int(rng.integers(4, 9))
        n_basis = int(rng.integers(3, 7))
        net = QuantileNetwork(obs_dim, n_actions, rng, width=width, n_basis=n_basis)
        rows = 4
        obs = rng.normal(0.0, 1.0, size=(rows, obs_dim))
        taus = rng.uniform(0.05, 0.95, size=rows)
        actions = rng.integers(0, n_actions, size=rows)
        targets = rng.normal(0.0, 2.0, size=rows)
        cfg = LossConfig("quantile-huber", kappa=1.0)

        def scalar_loss() -> float:
            z = pick(net.forward(obs, taus), actions)
            resid = sub(Tensor(targets), z)
            return float(tsum(elementwise_loss_graph(resid, taus, cfg)).values)

        z = pick(net.forward(obs, taus), actions)
        resid = sub(Tensor(targets), z)
        out = tsum(elementwise_loss_graph(resid, taus, cfg))
        params = net.params()
        zero_grads(params)
        out.backward()

        for p in params.values():
            analytic = p.grad if p.grad is not None else np.zeros_like(p.values)
            flat = p.values.ravel()
            for idx in range(flat.size):
                orig = flat[idx]
                with no_grad():
                    flat[idx] = orig + h
                    f_plus = scalar_loss()
                    flat[idx] = orig - h
                    f_minus = scalar_loss()
                flat[idx] = orig
                fd = (f_plus - f_minus) / (2.0 * h)
                a = analytic.ravel()[idx]
                worst = max(worst, abs(a - fd) / max(1.0, abs(a), abs(fd)))
    return worst < tol, f"{n_networks} networks, max relative error {worst:.2e}"


def check_loss_identities(seed: int = 99) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    u = rng.normal(0.0, 3.0, size=2000)
    tau = rng.uniform(0.01, 0.99, size=2000)
    problems = []
    alt = np.abs(tau - (u < 0)) * np.abs(u)
    if not np.allclose(check_loss(u, tau), alt, rtol=0, atol=1e-15):
        problems.append("check loss alternate form mismatch")
    kappa = 0.7
    qh = quantile_huber(u, tau, kappa)
    w = np.abs(tau - (u < 0))
    nz = u != 0
    if not np.allclose(qh[nz] * kappa / w[nz], huber_kernel(u[nz], kappa), rtol=1e-12, atol=0):
        problems.append("quantile-huber / huber-kernel relation mismatch")
    tiny = 1e-6
    big = np.abs(u) >= tiny
    gap = np.abs(quantile_huber(u[big], tau[big], tiny) - check_loss(u[big], tau[big]))
    if np.any(gap > tiny / 2 + 1e-18):
        problems.append("huber-check gap bound violated")
    return not problems, "; ".join(problems) if problems else "alternate form, kernel relation, gap bound"


def invariant_suite(fast: bool = True) -> list[VerifyResult]:
    """Run every fast oracle/invariant check; `fast=False` uses acceptance sizes."""
    checks = [
        ("correction-properties", check_correction_properties),
        ("slot-coverage", check_slot_coverage),
        ("dro-oracle-equivalence", check_dro_equivalence),
        ("radius-schedule", check_schedule),
        ("loss-identities", check_loss_identities),
        (
            "autodiff-finite-difference",
            (lambda: finite_difference_check(n_networks=10)) if fast else finite_difference_check,
        ),
    ]
    results = []
    for name, fn in checks:
        passed, detail, elapsed = _timed(fn)
        results.append(VerifyResult(name=name, passed=passed, detail=detail, elapsed_s=elapsed))
    return results

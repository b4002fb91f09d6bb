"""Four-state chain MDP with deterministic transitions and a bimodal
terminal reward, plus its exact return-quantile oracle.

States 0 -> 1 -> 2 -> 3 under a single action; reward is zero everywhere
except on the transition entering state 3, where it is drawn from the
Gaussian mixture 0.5*N(-2, 1) + 0.5*N(2, 1). The return from state s is
therefore gamma^(2-s) times one terminal draw, which makes closed-form
quantiles available for degeneration analysis.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

N_STATES = 4
TERMINAL_STATE = 3
MIXTURE_MEANS = (-2.0, 2.0)
MIXTURE_STD = 1.0
MIXTURE_VARIANCE = 5.0  # 0.5*(1+4) + 0.5*(1+4)


@dataclass(frozen=True)
class ChainConfig:
    gamma: float = 0.99
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")


def sample_mixture(rng: np.random.Generator, size=None):
    """Draw from 0.5*N(-2, 1) + 0.5*N(2, 1)."""
    if size is None:
        mean = MIXTURE_MEANS[1] if rng.random() < 0.5 else MIXTURE_MEANS[0]
        return float(rng.normal(mean, MIXTURE_STD))
    pick_high = rng.random(size) < 0.5
    means = np.where(pick_high, MIXTURE_MEANS[1], MIXTURE_MEANS[0])
    return rng.normal(means, MIXTURE_STD)


def mixture_cdf(x):
    return 0.5 * (ndtr(np.asarray(x) - MIXTURE_MEANS[0]) + ndtr(np.asarray(x) - MIXTURE_MEANS[1]))


@functools.lru_cache(maxsize=None)
def mixture_quantile(tau: float) -> float:
    """Invert the mixture CDF by bisection; probe grids repeat, so cache."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {tau}")
    return brentq(lambda x: mixture_cdf(x) - tau, -14.0, 14.0, xtol=1e-12)


def chain_step(state: int, rng: np.random.Generator) -> tuple[int, float, bool]:
    """Advance one deterministic transition; terminal reward on entering state 3."""
    if state not in (0, 1, 2):
        raise ValueError(f"invalid chain state {state}; live states are 0, 1, 2")
    nxt = state + 1
    if nxt == TERMINAL_STATE:
        return nxt, sample_mixture(rng), True
    return nxt, 0.0, False


def true_return_quantiles(state: int, gamma: float, taus) -> np.ndarray:
    """Exact quantiles of the return gamma^(2-state) * r for states 0..2."""
    if state not in (0, 1, 2):
        raise ValueError(f"no return distribution for state {state}; live states are 0, 1, 2")
    taus = np.atleast_1d(np.asarray(taus, dtype=np.float64))
    scale = gamma ** (2 - state)
    return scale * np.array([mixture_quantile(t) for t in taus])


def true_return_std(state: int, gamma: float) -> float:
    return gamma ** (2 - state) * float(np.sqrt(MIXTURE_VARIANCE))


def one_hot(state: int) -> np.ndarray:
    obs = np.zeros(N_STATES)
    obs[state] = 1.0
    return obs


class ChainEnv:
    """Episode wrapper around `chain_step` with one-hot observations."""

    n_actions = 1
    obs_dim = N_STATES

    def __init__(self, cfg: ChainConfig, rng: np.random.Generator | None = None):
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.state = 0

    def reset(self) -> np.ndarray:
        self.state = 0
        return one_hot(self.state)

    def step(self, action: int):
        if action != 0:
            raise ValueError(f"chain MDP has a single action, got {action}")
        nxt, reward, done = chain_step(self.state, self.rng)
        self.state = nxt
        return one_hot(nxt), reward, done, {}

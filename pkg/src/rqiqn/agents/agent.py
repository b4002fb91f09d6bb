"""Replay-trained distributional agent: fraction sampling, greedy selection
over distorted quantile means, robust TD-error construction, and target
synchronization. A scalar DQN baseline shares the surrounding machinery.

Setting the robustness radius schedule to zero recovers plain IQN exactly:
the correction is skipped, and the random draws are identical either way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import (
    NonFiniteGradientError,
    OptimizerState,
    Tensor,
    huber,
    no_grad,
    optimizer_step,
    pick,
    reshape,
    sub,
    tmean,
    tsum,
    zero_grads,
)
from ..losses import LossConfig, elementwise_loss_graph
from ..robust import (
    ADAPTIVE_CVAR,
    CVAR,
    IDENTITY,
    DistortionConfig,
    RobustConfig,
    epsilon_schedule,
)
from ..robust import correction as robust_correction
from .networks import QuantileNetwork, ScalarQNetwork
from .replay import ReplayBuffer

FRACTION_MARGIN = 1e-6  # keep sampled fractions strictly inside (0, 1)


@dataclass(frozen=True)
class ExplorationSchedule:
    """Linear epsilon-greedy decay."""

    start: float = 1.0
    end: float = 0.05
    horizon: int = 10_000

    def value(self, t: int) -> float:
        if t >= self.horizon:
            return self.end
        return self.start + (self.end - self.start) * (t / self.horizon)


@dataclass(frozen=True)
class AgentConfig:
    n_current: int = 8
    n_target: int = 8
    k_action: int = 32
    gamma: float = 0.99
    loss: LossConfig = LossConfig()
    robust: RobustConfig = RobustConfig()
    distortion: DistortionConfig = DistortionConfig()
    learning_rate: float = 5e-4
    batch_size: int = 64
    target_sync: int = 1000
    exploration: ExplorationSchedule = ExplorationSchedule()
    train_start: int = 1000
    replay_capacity: int = 50_000
    width: int = 128
    n_basis: int = 64
    state_depth: int = 2
    grad_clip: float | None = None
    seed: int = 0

    def __post_init__(self):
        if min(self.n_current, self.n_target, self.k_action) < 1:
            raise ValueError("fraction counts N, N', K must all be >= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.batch_size < 1 or self.target_sync < 1:
            raise ValueError("batch_size and target_sync must be >= 1")


def sample_fractions(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform draws over (margin, 1 - margin); endpoints are excluded so the
    raw order-2 correction stays finite."""
    return FRACTION_MARGIN + rng.random(shape) * (1.0 - 2.0 * FRACTION_MARGIN)


def _distort_batch(
    taus: np.ndarray, cfg: DistortionConfig, distances: np.ndarray | None
) -> np.ndarray:
    if cfg.kind == IDENTITY:
        return taus
    if cfg.kind == CVAR:
        return cfg.eta * taus
    if distances is None:
        raise ValueError("adaptive-cvar distortion requires obstacle distances")
    etas = np.clip(np.asarray(distances, dtype=np.float64) / cfg.d_safe, cfg.eta_min, 1.0)
    return etas[:, None] * taus


def greedy_actions(
    net: QuantileNetwork,
    obs: np.ndarray,
    k: int,
    distortion: DistortionConfig,
    rng: np.random.Generator,
    distances: np.ndarray | None = None,
) -> np.ndarray:
    """Argmax over actions of the mean of K distorted quantile samples.

    Ties break toward the lowest action index. Single-action environments
    short-circuit without consuming random draws.
    """
    obs = np.atleast_2d(obs)
    if net.n_actions == 1:
        return np.zeros(obs.shape[0], dtype=np.int64)
    taus = _distort_batch(sample_fractions(rng, (obs.shape[0], k)), distortion, distances)
    means = net.quantile_values(obs, taus).mean(axis=1)
    return np.argmax(means, axis=1)


class DistributionalAgent:
    """RQIQN agent; IQN is the zero-radius special case."""

    kind = "rqiqn"

    def __init__(self, obs_dim: int, n_actions: int, cfg: AgentConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.rng = rng
        self.online = QuantileNetwork(
            obs_dim, n_actions, rng, width=cfg.width, n_basis=cfg.n_basis, state_depth=cfg.state_depth
        )
        self.target = self.online.clone()
        self.optimizer = OptimizerState(learning_rate=cfg.learning_rate)
        self.step_count = 0

    # -- policy --------------------------------------------------------------

    def radius(self, t: int | None = None) -> float:
        t = self.step_count if t is None else t
        return epsilon_schedule(t, self.cfg.robust)

    def select_action(
        self,
        obs_vec: np.ndarray,
        obstacle_distance: float | None = None,
        net: QuantileNetwork | None = None,
        rng: np.random.Generator | None = None,
    ) -> int:
        net = self.online if net is None else net
        rng = self.rng if rng is None else rng
        distances = None if obstacle_distance is None else np.array([obstacle_distance])
        return int(
            greedy_actions(
                net, obs_vec[None, :], self.cfg.k_action, self.cfg.distortion, rng, distances
            )[0]
        )

    def act(self, obs_vec: np.ndarray, obstacle_distance: float | None = None) -> int:
        """Epsilon-greedy during training; greedy when only one action exists."""
        if self.n_actions == 1:
            return 0
        if self.rng.random() < self.cfg.exploration.value(self.step_count):
            return int(self.rng.integers(self.n_actions))
        return self.select_action(obs_vec, obstacle_distance)

    # -- robust TD construction ----------------------------------------------

    def compute_robust_td(self, batch: dict, eps_t: float):
        """Residual tensor delta[b, i, j] = r + gamma*Z_{tau'_j}(s', a*) + Delta_i
        - Z_{tau_i}(s, a), with the bootstrap zeroed on terminal transitions.

        Returns (delta Tensor [B, N, N'], current fractions [B, N],
        target fractions [B, N']). The target side carries no gradient and the
        correction depends on the current fractions only.
        """
        cfg = self.cfg
        b = batch["obs"].shape[0]
        if b == 0:
            raise ValueError("empty batch")

        a_star = greedy_actions(
            self.target,
            batch["next_obs"],
            cfg.k_action,
            cfg.distortion,
            self.rng,
            distances=batch["next_distance"],
        )
        taus_target = sample_fractions(self.rng, (b, cfg.n_target))
        z_next = self.target.quantile_values(batch["next_obs"], taus_target)
        z_next_astar = np.take_along_axis(z_next, a_star[:, None, None], axis=2)[:, :, 0]
        live = 1.0 - batch["done"].astype(np.float64)
        targets = batch["rewards"][:, None] + cfg.gamma * live[:, None] * z_next_astar
        if not np.all(np.isfinite(targets)):
            i = int(np.argmin(np.isfinite(targets).all(axis=1)))
            raise RuntimeError(f"non-finite bootstrap target for transition {i} in batch")

        taus_current = sample_fractions(self.rng, (b, cfg.n_current))
        target_block = targets[:, None, :]
        if eps_t > 0.0:
            target_block = target_block + robust_correction(taus_current, eps_t, cfg.robust)[:, :, None]

        z = self.online.forward(
            np.repeat(batch["obs"], cfg.n_current, axis=0), taus_current.reshape(-1)
        )
        if not np.all(np.isfinite(z.values)):
            row = int(np.argmin(np.isfinite(z.values).all(axis=1)))
            raise RuntimeError(
                f"non-finite quantile output for transition {row // cfg.n_current} in batch"
            )
        z_taken = reshape(pick(z, np.repeat(batch["actions"], cfg.n_current)), (b, cfg.n_current, 1))
        delta = sub(Tensor(target_block), z_taken)
        return delta, taus_current, taus_target

    def loss(self, batch: dict, eps_t: float) -> Tensor:
        """Batch mean of the per-transition pairwise quantile loss."""
        delta, taus_current, _ = self.compute_robust_td(batch, eps_t)
        elem = elementwise_loss_graph(delta, taus_current[:, :, None], self.cfg.loss)
        scale = 1.0 / (batch["obs"].shape[0] * self.cfg.n_target)
        return tsum(elem) * scale

    # -- training ------------------------------------------------------------

    def train_step(self, buffer: ReplayBuffer) -> dict:
        """One environment step's worth of learning; returns step metrics."""
        self.step_count += 1
        t = self.step_count
        eps_t = self.radius(t)
        loss_value = None
        if t >= self.cfg.train_start and len(buffer) >= self.cfg.batch_size:
            batch = buffer.sample(self.cfg.batch_size, self.rng)
            loss_t = self.loss(batch, eps_t)
            params = self.online.params()
            zero_grads(params)
            loss_t.backward()
            optimizer_step(params, self.optimizer, self.cfg.grad_clip)
            loss_value = loss_t.item()
        if t % self.cfg.target_sync == 0:
            self.target.copy_from(self.online)
        return {"loss": loss_value, "epsilon": eps_t}


class DqnAgent:
    """Scalar one-step TD baseline with Huberized squared error."""

    kind = "dqn"

    def __init__(self, obs_dim: int, n_actions: int, cfg: AgentConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.rng = rng
        self.online = ScalarQNetwork(obs_dim, n_actions, rng, width=cfg.width)
        self.target = self.online.clone()
        self.optimizer = OptimizerState(learning_rate=cfg.learning_rate)
        self.step_count = 0

    def radius(self, t: int | None = None) -> float:
        return 0.0

    def select_action(self, obs_vec, obstacle_distance=None, rng=None) -> int:
        return int(np.argmax(self.online.q_values(obs_vec[None, :])[0]))

    def act(self, obs_vec: np.ndarray, obstacle_distance: float | None = None) -> int:
        if self.n_actions == 1:
            return 0
        if self.rng.random() < self.cfg.exploration.value(self.step_count):
            return int(self.rng.integers(self.n_actions))
        return self.select_action(obs_vec)

    def loss(self, batch: dict) -> Tensor:
        q_next = self.target.q_values(batch["next_obs"]).max(axis=1)
        live = 1.0 - batch["done"].astype(np.float64)
        targets = batch["rewards"] + self.cfg.gamma * live * q_next
        if not np.all(np.isfinite(targets)):
            i = int(np.argmin(np.isfinite(targets)))
            raise RuntimeError(f"non-finite bootstrap target for transition {i} in batch")
        q = pick(self.online.forward(batch["obs"]), batch["actions"])
        return tmean(huber(sub(Tensor(targets), q), self.cfg.loss.kappa))

    def train_step(self, buffer: ReplayBuffer) -> dict:
        self.step_count += 1
        t = self.step_count
        loss_value = None
        if t >= self.cfg.train_start and len(buffer) >= self.cfg.batch_size:
            batch = buffer.sample(self.cfg.batch_size, self.rng)
            loss_t = self.loss(batch)
            params = self.online.params()
            zero_grads(params)
            loss_t.backward()
            optimizer_step(params, self.optimizer, self.cfg.grad_clip)
            loss_value = loss_t.item()
        if t % self.cfg.target_sync == 0:
            self.target.copy_from(self.online)
        return {"loss": loss_value, "epsilon": 0.0}


def build_agent(kind: str, obs_dim: int, n_actions: int, cfg: AgentConfig, rng: np.random.Generator):
    if kind == "dqn":
        return DqnAgent(obs_dim, n_actions, cfg, rng)
    if kind in ("iqn", "rqiqn"):
        return DistributionalAgent(obs_dim, n_actions, cfg, rng)
    raise ValueError(f"unknown agent kind {kind!r}")

"""Experiment configuration: strict JSON parsing (unknown keys are errors),
canonical hashing, and the desk-scale experiment presets."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .agents.agent import AgentConfig, ExplorationSchedule
from .envs.chain import ChainConfig
from .envs.navigation import NavConfig, Obstacle, Vortex
from .losses import LossConfig
from .robust import DistortionConfig, RobustConfig

TASKS = ("chain", "nav")
AGENTS = ("dqn", "iqn", "rqiqn")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    agent: str
    agent_config: AgentConfig
    chain: ChainConfig | None = None
    nav: NavConfig | None = None
    total_steps: int = 10_000
    eval_episodes: int = 100
    eval_period: int = 1_000
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "runs/experiment"
    eval_layout_seed: int = 987_654
    workers: int = 1

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.agent not in AGENTS:
            raise ConfigError(f"unknown agent {self.agent!r}; expected one of {AGENTS}")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if self.task == "chain" and self.chain is None:
            raise ConfigError("chain task requires a chain section")
        if self.task == "nav" and self.nav is None:
            raise ConfigError("nav task requires a nav section")
        if self.eval_period < 1 or self.eval_episodes < 0 or self.total_steps < 0:
            raise ConfigError("eval_period must be >= 1; step/episode counts must be >= 0")
        if self.agent == "iqn" and self.agent_config.robust.epsilon0 != 0.0:
            raise ConfigError("agent 'iqn' is the zero-radius case; set robust.epsilon0 = 0 or use 'rqiqn'")


def _strict(d: dict, allowed: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _parse_loss(d: dict) -> LossConfig:
    _strict(d, {"variant", "kappa"}, "loss")
    return LossConfig(**d)


def _parse_robust(d: dict) -> RobustConfig:
    _strict(d, {"order", "epsilon0", "k", "t0", "variant"}, "robust")
    return RobustConfig(**d)


def _parse_distortion(d: dict) -> DistortionConfig:
    _strict(d, {"kind", "eta", "d_safe", "eta_min"}, "distortion")
    return DistortionConfig(**d)


def _parse_exploration(d: dict) -> ExplorationSchedule:
    _strict(d, {"start", "end", "horizon"}, "exploration")
    return ExplorationSchedule(**d)


def _parse_agent_config(d: dict) -> AgentConfig:
    allowed = {
        "n_current", "n_target", "k_action", "gamma", "loss", "robust", "distortion",
        "learning_rate", "batch_size", "target_sync", "exploration", "train_start",
        "replay_capacity", "width", "n_basis", "state_depth", "grad_clip", "seed",
    }
    _strict(d, allowed, "agent_config")
    d = dict(d)
    if "loss" in d:
        d["loss"] = _parse_loss(d["loss"])
    if "robust" in d:
        d["robust"] = _parse_robust(d["robust"])
    if "distortion" in d:
        d["distortion"] = _parse_distortion(d["distortion"])
    if "exploration" in d:
        d["exploration"] = _parse_exploration(d["exploration"])
    return AgentConfig(**d)


def _parse_chain(d: dict) -> ChainConfig:
    _strict(d, {"gamma", "seed"}, "chain")
    return ChainConfig(**d)


def _parse_nav(d: dict) -> NavConfig:
    allowed = {
        "bounds", "n_obstacles", "obstacle_radius_range", "n_vortices",
        "vortex_circulation_range", "vortex_core_range", "obstacles", "vortices",
        "max_speed", "accel", "turn_rate", "dt", "vehicle_radius", "lidar_rays",
        "lidar_range", "lidar_fov", "episode_cap", "goal_radius", "reward_progress",
        "reward_collision", "reward_step", "reward_goal", "layout_seed",
    }
    _strict(d, allowed, "nav")
    d = dict(d)
    for key in ("bounds", "obstacle_radius_range", "vortex_circulation_range", "vortex_core_range"):
        if key in d:
            d[key] = tuple(d[key])
    if d.get("obstacles") is not None:
        d["obstacles"] = tuple(Obstacle(*row) for row in d["obstacles"])
    if d.get("vortices") is not None:
        d["vortices"] = tuple(Vortex(*row) for row in d["vortices"])
    return NavConfig(**d)


def experiment_from_dict(d: dict) -> ExperimentConfig:
    allowed = {
        "task", "agent", "agent_config", "chain", "nav", "total_steps", "eval_episodes",
        "eval_period", "seeds", "output_dir", "eval_layout_seed", "workers",
    }
    _strict(d, allowed, "experiment")
    d = dict(d)
    d["agent_config"] = _parse_agent_config(d.get("agent_config", {}))
    if "chain" in d and d["chain"] is not None:
        d["chain"] = _parse_chain(d["chain"])
    if "nav" in d and d["nav"] is not None:
        d["nav"] = _parse_nav(d["nav"])
    if "seeds" in d:
        d["seeds"] = tuple(int(s) for s in d["seeds"])
    return ExperimentConfig(**d)


def load_experiment(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return experiment_from_dict(raw)


def experiment_to_dict(cfg: ExperimentConfig) -> dict:
    d = dataclasses.asdict(cfg)

    def clean(obj):
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [clean(v) for v in obj]
        return obj

    return clean(d)


def save_experiment(cfg: ExperimentConfig, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(experiment_to_dict(cfg), fh, indent=2)


def config_hash(cfg: ExperimentConfig | AgentConfig) -> str:
    blob = json.dumps(dataclasses.asdict(cfg), sort_keys=True, default=str)
    return hashlib.sha1(blob.encode()).hexdigest()


# -- desk-scale presets --------------------------------------------------------


def chain_agent_config(kind: str, seed: int = 0, loss_variant: str | None = None, epsilon0: float = 1.0) -> AgentConfig:
    # default losses per agent: the robust agent trains on the check loss,
    # the baselines on the standard quantile Huber
    if loss_variant is None:
        loss_variant = "check" if kind == "rqiqn" else "quantile-huber"
    robust = RobustConfig(
        order="two",
        variant="bounded",
        epsilon0=epsilon0 if kind == "rqiqn" else 0.0,
        k=5e-5,
        t0=1e5,
    )
    return AgentConfig(
        n_current=8,
        n_target=8,
        k_action=8,
        gamma=0.99,
        loss=LossConfig(loss_variant, 1.0),
        robust=robust,
        distortion=DistortionConfig(),
        learning_rate=5e-4,
        batch_size=16,
        target_sync=500,
        exploration=ExplorationSchedule(0.0, 0.0, 1),
        train_start=500,
        replay_capacity=10_000,
        width=64,
        n_basis=32,
        state_depth=1,
        seed=seed,
    )


def chain_experiment(
    agent: str,
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4),
    total_steps: int = 200_000,
    output_dir: str = "runs/chain",
    eval_period: int = 20_000,
    workers: int = 1,
    loss_variant: str | None = None,
) -> ExperimentConfig:
    return ExperimentConfig(
        task="chain",
        agent=agent,
        agent_config=chain_agent_config(agent, loss_variant=loss_variant),
        chain=ChainConfig(gamma=0.99),
        total_steps=total_steps,
        eval_episodes=32,
        eval_period=eval_period,
        seeds=seeds,
        output_dir=output_dir,
        workers=workers,
    )


def nav_agent_config(
    kind: str,
    adaptive: bool = False,
    total_steps: int = 40_000,
    seed: int = 0,
) -> AgentConfig:
    robust = RobustConfig(
        order="two",
        variant="bounded",
        epsilon0=1.0 if kind == "rqiqn" else 0.0,
        k=16.0 / total_steps,
        t0=0.35 * total_steps,
    )
    distortion = (
        DistortionConfig(kind="adaptive-cvar", eta=1.0, d_safe=5.0, eta_min=0.25)
        if adaptive
        else DistortionConfig()
    )
    return AgentConfig(
        n_current=8,
        n_target=8,
        k_action=16,
        gamma=0.99,
        loss=LossConfig("check", 1.0),
        robust=robust,
        distortion=distortion,
        learning_rate=5e-4,
        batch_size=32,
        target_sync=1000,
        exploration=ExplorationSchedule(1.0, 0.05, int(0.5 * total_steps)),
        train_start=1000,
        replay_capacity=50_000,
        width=64,
        n_basis=32,
        seed=seed,
    )


def nav_experiment(
    agent: str,
    adaptive: bool = False,
    seeds: tuple[int, ...] = (0, 1, 2),
    total_steps: int = 40_000,
    output_dir: str = "runs/nav",
    eval_period: int = 10_000,
    eval_episodes: int = 100,
    workers: int = 1,
) -> ExperimentConfig:
    return ExperimentConfig(
        task="nav",
        agent=agent,
        agent_config=nav_agent_config(agent, adaptive=adaptive, total_steps=total_steps),
        nav=NavConfig(),
        total_steps=total_steps,
        eval_episodes=eval_episodes,
        eval_period=eval_period,
        seeds=seeds,
        output_dir=output_dir,
        workers=workers,
    )

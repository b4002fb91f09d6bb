"""Experiment runner: per-seed training loops, periodic held-out evaluation,
crash-safe incremental metrics output, and cross-seed aggregation."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .agents import ReplayBuffer, Transition, build_agent, save_snapshot
from .agents.agent import DistributionalAgent
from .autodiff import NonFiniteGradientError
from .config import ExperimentConfig, config_hash, save_experiment
from .envs.chain import ChainEnv, one_hot
from .envs.navigation import COLLISION, SUCCESS, TIMEOUT, NavEnv, Observation, sample_layout, save_layouts
from .metrics import MetricsRecord, append_record_jsonl, degeneration_report, export_records


def _vec(obs) -> np.ndarray:
    return obs.vector if isinstance(obs, Observation) else obs


def _distance(obs) -> float:
    return obs.nearest_obstacle_distance if isinstance(obs, Observation) else float("inf")


def _quantile_probe(agent: DistributionalAgent):
    def probe(state: int, taus: np.ndarray) -> np.ndarray:
        return agent.online.quantile_values(one_hot(state)[None, :], taus[None, :])[0, :, 0]

    return probe


def evaluate_chain(agent, chain_cfg, eval_env: ChainEnv, episodes: int) -> dict:
    returns = []
    for _ in range(episodes):
        eval_env.reset()
        done = False
        total = 0.0
        while not done:
            _, r, done, _ = eval_env.step(0)
            total += r
        returns.append(total)
    returns = np.asarray(returns) if returns else np.zeros(1)
    out = {
        "return_mean": float(returns.mean()),
        "return_std": float(returns.std()),
        "success_rate": 1.0,
        "collision_rate": 0.0,
        "timeout_rate": 0.0,
        "probe_state_std": (),
        "degeneration": None,
    }
    if isinstance(agent, DistributionalAgent):
        report = degeneration_report(_quantile_probe(agent), chain_cfg.gamma)
        out["probe_state_std"] = tuple(report["states"][s]["std"] for s in (0, 1, 2))
        out["degeneration"] = report
    return out


def heldout_layouts(cfg: ExperimentConfig) -> list:
    rng = np.random.default_rng(cfg.eval_layout_seed)
    return [sample_layout(cfg.nav, rng) for _ in range(cfg.eval_episodes)]


def evaluate_nav(agent, nav_cfg, layouts, eval_rng: np.random.Generator) -> dict:
    env = NavEnv(nav_cfg, rng=np.random.default_rng(0))
    outcomes = []
    for layout in layouts:
        obs = env.reset(layout)
        done = False
        while not done:
            action = agent.select_action(_vec(obs), _distance(obs), rng=eval_rng)
            obs, _, done, _ = env.step(action)
        outcomes.append(env.outcome())
    n = max(len(outcomes), 1)
    kinds = [o.kind for o in outcomes]
    returns = np.asarray([o.episode_return for o in outcomes]) if outcomes else np.zeros(1)
    succ = [o for o in outcomes if o.kind == SUCCESS]
    return {
        "return_mean": float(returns.mean()),
        "return_std": float(returns.std()),
        "success_rate": kinds.count(SUCCESS) / n,
        "collision_rate": kinds.count(COLLISION) / n,
        "timeout_rate": kinds.count(TIMEOUT) / n,
        "time_success_mean": float(np.mean([o.elapsed_s for o in succ])) if succ else None,
        "energy_success_mean": float(np.mean([o.energy for o in succ])) if succ else None,
        "probe_state_std": (),
    }


def run_seed(cfg: ExperimentConfig, seed: int) -> dict:
    t_start = time.perf_counter()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    children = np.random.SeedSequence([cfg.agent_config.seed, seed]).spawn(4)
    agent_rng, env_rng, eval_env_rng, eval_action_rng = (np.random.default_rng(c) for c in children)

    if cfg.task == "chain":
        env = ChainEnv(cfg.chain, rng=env_rng)
        eval_env = ChainEnv(cfg.chain, rng=eval_env_rng)
        layouts = None
    else:
        env = NavEnv(cfg.nav, rng=env_rng)
        eval_env = None
        layouts = heldout_layouts(cfg)

    agent = build_agent(cfg.agent, env.obs_dim, env.n_actions, cfg.agent_config, agent_rng)
    buffer = ReplayBuffer(cfg.agent_config.replay_capacity, env.obs_dim)

    metrics_path = out / f"metrics_seed{seed}.jsonl"
    metrics_path.write_text("")
    records: list[MetricsRecord] = []
    aborted: str | None = None
    last_nav_eval: dict | None = None
    last_degeneration: dict | None = None

    obs = env.reset()
    for t in range(1, cfg.total_steps + 1):
        action = agent.act(_vec(obs), _distance(obs))
        next_obs, reward, done, _ = env.step(action)
        buffer.push(
            Transition(_vec(obs), action, reward, _vec(next_obs), done, _distance(next_obs))
        )
        try:
            step_metrics = agent.train_step(buffer)
        except (NonFiniteGradientError, RuntimeError) as exc:
            aborted = str(exc)
            rec = MetricsRecord(
                step=t, loss=None, epsilon=0.0, eval_return_mean=0.0, eval_return_std=0.0,
                success_rate=0.0, collision_rate=0.0, timeout_rate=0.0,
                wall_clock=time.perf_counter() - t_start, note=f"aborted: {exc}",
            )
            records.append(rec)
            append_record_jsonl(metrics_path, rec)
            break
        loss = step_metrics["loss"]
        if loss is not None and not math.isfinite(loss):
            aborted = "non-finite loss"
            rec = MetricsRecord(
                step=t, loss=None, epsilon=step_metrics["epsilon"], eval_return_mean=0.0,
                eval_return_std=0.0, success_rate=0.0, collision_rate=0.0, timeout_rate=0.0,
                wall_clock=time.perf_counter() - t_start, note="aborted: non-finite loss",
            )
            records.append(rec)
            append_record_jsonl(metrics_path, rec)
            break
        obs = env.reset() if done else next_obs

        if t % cfg.eval_period == 0 or t == cfg.total_steps:
            if cfg.task == "chain":
                stats = evaluate_chain(agent, cfg.chain, eval_env, cfg.eval_episodes)
                last_degeneration = stats.pop("degeneration")
            else:
                stats = evaluate_nav(agent, cfg.nav, layouts, eval_action_rng)
                last_nav_eval = stats
            rec = MetricsRecord(
                step=t,
                loss=loss,
                epsilon=step_metrics["epsilon"],
                eval_return_mean=stats["return_mean"],
                eval_return_std=stats["return_std"],
                success_rate=stats["success_rate"],
                collision_rate=stats["collision_rate"],
                timeout_rate=stats["timeout_rate"],
                probe_state_std=stats["probe_state_std"],
                wall_clock=time.perf_counter() - t_start,
            )
            records.append(rec)
            append_record_jsonl(metrics_path, rec)

    export_records(records, out / f"metrics_seed{seed}.csv")
    save_snapshot(out / f"snapshot_seed{seed}.npz", agent, config_hash(cfg))
    if cfg.task == "chain" and last_degeneration is not None:
        with open(out / f"quantiles_seed{seed}.json", "w") as fh:
            json.dump(last_degeneration, fh)

    report = {
        "seed": seed,
        "aborted": aborted,
        "steps_completed": records[-1].step if records else 0,
        "wall_clock": time.perf_counter() - t_start,
        "final": records[-1].to_json_dict() if records else None,
    }
    if cfg.task == "nav" and last_nav_eval is not None:
        report["nav_summary"] = {
            "success_rate": last_nav_eval["success_rate"],
            "collision_rate": last_nav_eval["collision_rate"],
            "timeout_rate": last_nav_eval["timeout_rate"],
            "return_mean": last_nav_eval["return_mean"],
            "return_std": last_nav_eval["return_std"],
            "time_success_mean": last_nav_eval["time_success_mean"],
            "energy_success_mean": last_nav_eval["energy_success_mean"],
        }
    if cfg.task == "chain" and last_degeneration is not None:
        report["chain_summary"] = {
            str(s): {
                "std": last_degeneration["states"][s]["std"],
                "gap_exact": abs(
                    last_degeneration["states"][s]["std"]
                    - last_degeneration["states"][s]["true_std_exact"]
                ),
                "true_std_exact": last_degeneration["states"][s]["true_std_exact"],
            }
            for s in (0, 1, 2)
        }
    return report


def _aggregate(cfg: ExperimentConfig, seed_reports: list[dict]) -> dict:
    agg: dict = {"n_seeds": len(seed_reports)}
    if cfg.task == "nav":
        rows = [r["nav_summary"] for r in seed_reports if r.get("nav_summary")]
        if rows:
            for key in ("success_rate", "collision_rate", "timeout_rate", "return_mean"):
                vals = np.asarray([row[key] for row in rows])
                agg[key + "_mean"] = float(vals.mean())
                agg[key + "_std"] = float(vals.std())
            for key in ("time_success_mean", "energy_success_mean"):
                vals = [row[key] for row in rows if row[key] is not None]
                agg[key] = float(np.mean(vals)) if vals else None
    else:
        rows = [r["chain_summary"] for r in seed_reports if r.get("chain_summary")]
        if rows:
            for s in ("0", "1", "2"):
                stds = np.asarray([row[s]["std"] for row in rows])
                gaps = np.asarray([row[s]["gap_exact"] for row in rows])
                agg[f"state{s}_std_mean"] = float(stds.mean())
                agg[f"state{s}_gap_mean"] = float(gaps.mean())
                agg[f"state{s}_true_std"] = rows[0][s]["true_std_exact"]
    return agg


def run_experiment(cfg: ExperimentConfig) -> dict:
    t_start = time.perf_counter()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_experiment(cfg, out / "config.json")
    if cfg.task == "nav":
        save_layouts(out / "eval_layouts.json", heldout_layouts(cfg))

    if cfg.workers > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            seed_reports = list(pool.map(run_seed, [cfg] * len(cfg.seeds), cfg.seeds))
    else:
        seed_reports = [run_seed(cfg, seed) for seed in cfg.seeds]

    report = {
        "task": cfg.task,
        "agent": cfg.agent,
        "seeds": list(cfg.seeds),
        "per_seed": seed_reports,
        "aggregate": _aggregate(cfg, seed_reports),
        "elapsed_s": time.perf_counter() - t_start,
    }
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    return report

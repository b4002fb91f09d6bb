"""Render experiment figures to files next to the delimited metrics output."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import export_records, load_records


def _seed_label(path: Path) -> str:
    return path.stem.replace("metrics_", "")


def render_run_report(run_dir, out_dir=None) -> list[Path]:
    """Training curves, evaluation curves, and (for chain runs) quantile-spread
    and quantile-function figures, plus a combined csv of every seed."""
    run = Path(run_dir)
    out = Path(out_dir) if out_dir is not None else run / "figures"
    out.mkdir(parents=True, exist_ok=True)

    metric_files = sorted(run.glob("metrics_seed*.jsonl"))
    if not metric_files:
        raise FileNotFoundError(f"no metrics_seed*.jsonl files under {run}")
    per_seed = {_seed_label(f): load_records(f) for f in metric_files}

    task = None
    gamma = None
    config_path = run / "config.json"
    if config_path.exists():
        with open(config_path) as fh:
            cfg = json.load(fh)
        task = cfg.get("task")
        gamma = (cfg.get("chain") or {}).get("gamma")

    written: list[Path] = []

    fig, (ax_loss, ax_eps) = plt.subplots(1, 2, figsize=(10, 4))
    for label, recs in per_seed.items():
        pts = [(r.step, r.loss) for r in recs if r.loss is not None]
        if pts:
            ax_loss.plot(*zip(*pts), alpha=0.8, label=label)
        ax_eps.plot([r.step for r in recs], [r.epsilon for r in recs], alpha=0.8, label=label)
    ax_loss.set_xlabel("step")
    ax_loss.set_ylabel("training loss")
    ax_eps.set_xlabel("step")
    ax_eps.set_ylabel("robustness radius")
    ax_loss.legend(fontsize=7)
    fig.tight_layout()
    path = out / "training_curves.png"
    fig.savefig(path, dpi=140)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, recs in per_seed.items():
        steps = np.array([r.step for r in recs])
        means = np.array([r.eval_return_mean for r in recs])
        stds = np.array([r.eval_return_std for r in recs])
        ax.plot(steps, means, label=label)
        ax.fill_between(steps, means - stds, means + stds, alpha=0.15)
    ax.set_xlabel("step")
    ax.set_ylabel("evaluation return")
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = out / "eval_returns.png"
    fig.savefig(path, dpi=140)
    plt.close(fig)
    written.append(path)

    if task == "nav":
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, recs in per_seed.items():
            steps = [r.step for r in recs]
            ax.plot(steps, [r.success_rate for r in recs], label=f"{label} success")
            ax.plot(steps, [r.collision_rate for r in recs], ls="--", label=f"{label} collision")
        ax.set_xlabel("step")
        ax.set_ylabel("rate")
        ax.set_ylim(-0.02, 1.02)
        ax.legend(fontsize=6)
        fig.tight_layout()
        path = out / "outcome_rates.png"
        fig.savefig(path, dpi=140)
        plt.close(fig)
        written.append(path)

    has_probe = any(recs and recs[-1].probe_state_std for recs in per_seed.values())
    if has_probe:
        fig, axes = plt.subplots(1, 3, figsize=(12, 4), sharey=True)
        for label, recs in per_seed.items():
            recs = [r for r in recs if r.probe_state_std]
            steps = [r.step for r in recs]
            for s in range(3):
                axes[s].plot(steps, [r.probe_state_std[s] for r in recs], alpha=0.8, label=label)
        for s in range(3):
            if gamma is not None:
                axes[s].axhline(gamma ** (2 - s) * np.sqrt(5.0), color="k", ls=":", lw=1)
            axes[s].set_title(f"state {s}")
            axes[s].set_xlabel("step")
        axes[0].set_ylabel("quantile std")
        axes[0].legend(fontsize=6)
        fig.tight_layout()
        path = out / "quantile_spread.png"
        fig.savefig(path, dpi=140)
        plt.close(fig)
        written.append(path)

    quantile_files = sorted(run.glob("quantiles_seed*.json"))
    if quantile_files:
        fig, axes = plt.subplots(1, 3, figsize=(12, 4), sharey=True)
        for qf in quantile_files:
            with open(qf) as fh:
                dump = json.load(fh)
            taus = np.asarray(dump["taus"])
            for s in range(3):
                entry = dump["states"][str(s)] if str(s) in dump["states"] else dump["states"][s]
                axes[s].plot(taus, entry["values"], alpha=0.7, lw=1)
        with open(quantile_files[0]) as fh:
            dump = json.load(fh)
        taus = np.asarray(dump["taus"])
        for s in range(3):
            entry = dump["states"][str(s)] if str(s) in dump["states"] else dump["states"][s]
            axes[s].plot(taus, entry["true_values"], "k--", lw=1.5, label="true")
            axes[s].set_title(f"state {s}")
            axes[s].set_xlabel("fraction")
        axes[0].set_ylabel("return quantile")
        axes[0].legend(fontsize=7)
        fig.tight_layout()
        path = out / "quantile_functions.png"
        fig.savefig(path, dpi=140)
        plt.close(fig)
        written.append(path)

    combined = []
    for label in sorted(per_seed):
        combined.extend(per_seed[label])
    csv_path = out / "metrics_all_seeds.csv"
    export_records(combined, csv_path)
    written.append(csv_path)
    return written

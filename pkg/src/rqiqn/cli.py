"""Command-line interface: train, eval, verify, oracle checks, export, report."""

from __future__ import annotations

import dataclasses
import json
import math
import sys
from pathlib import Path

import click
import numpy as np


@click.group()
def main():
    """Distributionally robust implicit quantile networks, desk scale."""


@main.command()
@click.argument("config_file", type=click.Path(exists=True))
@click.option("--workers", type=int, default=None, help="Override the config worker count.")
def train(config_file, workers):
    """Train per the experiment CONFIG_FILE and write metrics/snapshots."""
    from .config import load_experiment
    from .runner import run_experiment

    cfg = load_experiment(config_file)
    if workers is not None:
        cfg = dataclasses.replace(cfg, workers=workers)
    report = run_experiment(cfg)
    click.echo(json.dumps({"output_dir": cfg.output_dir, "aggregate": report["aggregate"]}, indent=2))


@main.command("eval")
@click.argument("snapshot", type=click.Path(exists=True))
@click.argument("config_file", type=click.Path(exists=True))
@click.option("--episodes", type=int, default=None, help="Override the evaluation episode count.")
def eval_cmd(snapshot, config_file, episodes):
    """Evaluate a SNAPSHOT under the experiment CONFIG_FILE."""
    from .agents import build_agent, load_snapshot
    from .config import config_hash, load_experiment
    from .envs.chain import ChainEnv
    from .runner import evaluate_chain, evaluate_nav, heldout_layouts

    cfg = load_experiment(config_file)
    if episodes is not None:
        cfg = dataclasses.replace(cfg, eval_episodes=episodes)
    if cfg.task == "chain":
        obs_dim, n_actions = 4, 1
    else:
        obs_dim, n_actions = cfg.nav.obs_dim, 5
    agent = build_agent(cfg.agent, obs_dim, n_actions, cfg.agent_config, np.random.default_rng(0))
    meta = load_snapshot(snapshot, agent, config_hash(cfg))
    if cfg.task == "chain":
        stats = evaluate_chain(agent, cfg.chain, ChainEnv(cfg.chain, np.random.default_rng(1)), cfg.eval_episodes)
        stats.pop("degeneration", None)
    else:
        stats = evaluate_nav(agent, cfg.nav, heldout_layouts(cfg), np.random.default_rng(1))
    stats["snapshot_step"] = meta["step"]
    click.echo(json.dumps(stats, indent=2))


@main.command()
@click.option("--full", is_flag=True, help="Run acceptance-sized checks (slower).")
def verify(full):
    """Run the invariant/oracle suite; exit code 0 on pass."""
    from .verify import invariant_suite

    results = invariant_suite(fast=not full)
    ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        click.echo(f"[{status}] {r.name} ({r.elapsed_s:.2f}s): {r.detail}")
        ok = ok and r.passed
    sys.exit(0 if ok else 1)


@main.group()
def oracle():
    """Ad-hoc brute-force oracle checks."""


@oracle.command("dro")
@click.option("--tau", type=float, required=True, help="Quantile fraction in (0, 1).")
@click.option("--eps", type=float, required=True, help="Wasserstein radius >= 0.")
@click.option("--samples", type=str, required=True, help="Comma-separated target samples.")
@click.option("--resolution", type=float, default=1e-3, show_default=True)
def oracle_dro(tau, eps, samples, resolution):
    """Compare the grid-search robust minimizer against the closed form."""
    from .robust import delta_raw
    from .verify import EmpiricalTargetLaw, default_oracle_grid, dro_robust_minimizer_bruteforce, empirical_quantile_slot

    law = EmpiricalTargetLaw(np.array([float(s) for s in samples.split(",")]))
    grid = default_oracle_grid(law, eps, resolution)
    q_brute = dro_robust_minimizer_bruteforce(law, tau, eps, grid)
    q0 = empirical_quantile_slot(law, tau)
    q_closed = q0 + delta_raw(tau, eps, math.inf)
    diff = abs(q_brute - q_closed)
    click.echo(json.dumps({
        "nominal_slot": q0,
        "bruteforce_minimizer": q_brute,
        "closed_form": q_closed,
        "abs_difference": diff,
        "grid_resolution": resolution,
        "agree": diff <= resolution,
    }, indent=2))
    sys.exit(0 if diff <= resolution else 1)


@main.command()
@click.argument("records_file", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["csv", "json-lines"]), required=True)
@click.option("--out", type=click.Path(), default=None, help="Output path; derived from input when omitted.")
def export(records_file, fmt, out):
    """Convert a metrics file between csv and json-lines."""
    from .metrics import export_records, load_records

    records = load_records(records_file)
    if out is None:
        suffix = ".csv" if fmt == "csv" else ".jsonl"
        out = Path(records_file).with_suffix(suffix)
    path = export_records(records, out, fmt)
    click.echo(f"wrote {len(records)} records to {path}")


@main.command()
@click.argument("run_dir", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None, help="Figure directory; default <run_dir>/figures.")
def report(run_dir, out):
    """Render figures and a combined csv for a finished run directory."""
    from .report import render_run_report

    paths = render_run_report(run_dir, out)
    for p in paths:
        click.echo(f"wrote {p}")


if __name__ == "__main__":
    main()

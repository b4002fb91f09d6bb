"""Versioned agent snapshots: named parameter arrays plus a config hash."""

from __future__ import annotations

import json

import numpy as np

SNAPSHOT_VERSION = 1


class SnapshotError(RuntimeError):
    pass


def save_snapshot(path, agent, config_hash: str) -> None:
    arrays: dict[str, np.ndarray] = {}
    for name, p in agent.online.params().items():
        arrays[f"online/{name}"] = p.values
    for name, p in agent.target.params().items():
        arrays[f"target/{name}"] = p.values
    for name, m in agent.optimizer.first_moment.items():
        arrays[f"opt_m/{name}"] = m
    for name, v in agent.optimizer.second_moment.items():
        arrays[f"opt_v/{name}"] = v
    meta = {
        "version": SNAPSHOT_VERSION,
        "kind": agent.kind,
        "step": agent.step_count,
        "opt_step": agent.optimizer.step,
        "epsilon_t": agent.radius(),
        "config_hash": config_hash,
        "obs_dim": agent.obs_dim,
        "n_actions": agent.n_actions,
    }
    np.savez(path, __meta__=np.array(json.dumps(meta)), **arrays)


def read_meta(path) -> dict:
    with np.load(path, allow_pickle=False) as data:
        return json.loads(str(data["__meta__"]))


def load_snapshot(path, agent, config_hash: str | None = None) -> dict:
    """Restore parameters, optimizer moments, and counters in place."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"]))
        if meta["version"] != SNAPSHOT_VERSION:
            raise SnapshotError(f"snapshot version {meta['version']} unsupported")
        if meta["kind"] != agent.kind:
            raise SnapshotError(f"snapshot holds a {meta['kind']!r} agent, not {agent.kind!r}")
        if config_hash is not None and meta["config_hash"] != config_hash:
            raise SnapshotError("snapshot config hash does not match the supplied config")
        for name, p in agent.online.params().items():
            np.copyto(p.values, data[f"online/{name}"])
        for name, p in agent.target.params().items():
            np.copyto(p.values, data[f"target/{name}"])
        agent.optimizer.first_moment.clear()
        agent.optimizer.second_moment.clear()
        for key in data.files:
            if key.startswith("opt_m/"):
                agent.optimizer.first_moment[key[len("opt_m/"):]] = data[key].copy()
            elif key.startswith("opt_v/"):
                agent.optimizer.second_moment[key[len("opt_v/"):]] = data[key].copy()
        agent.optimizer.step = meta["opt_step"]
        agent.step_count = meta["step"]
    return meta

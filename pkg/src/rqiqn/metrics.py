"""Per-evaluation metrics records, delimited export, and the chain-MDP
degeneration report."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .envs.chain import true_return_quantiles, true_return_std

PROBE_TAUS = np.linspace(0.005, 0.995, 199)

BASE_COLUMNS = [
    "step",
    "loss",
    "epsilon",
    "eval_return_mean",
    "eval_return_std",
    "success_rate",
    "collision_rate",
    "timeout_rate",
]
TAIL_COLUMNS = ["wall_clock", "note"]

CSV_FORMAT = "csv"
JSONL_FORMAT = "json-lines"


@dataclass
class MetricsRecord:
    step: int
    loss: float | None
    epsilon: float
    eval_return_mean: float
    eval_return_std: float
    success_rate: float
    collision_rate: float
    timeout_rate: float
    probe_state_std: tuple[float, ...] = ()
    wall_clock: float = 0.0
    note: str = ""

    def __post_init__(self):
        self.probe_state_std = tuple(float(v) for v in self.probe_state_std)
        rates = self.success_rate + self.collision_rate + self.timeout_rate
        if not (math.isclose(rates, 1.0, abs_tol=1e-9) or rates == 0.0):
            raise ValueError(f"outcome rates must sum to 1 (or all be 0), got {rates}")

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["probe_state_std"] = list(self.probe_state_std)
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "MetricsRecord":
        d = dict(d)
        d["probe_state_std"] = tuple(d.get("probe_state_std", ()))
        return cls(**d)


def _columns(n_probe: int) -> list[str]:
    return BASE_COLUMNS + [f"probe_state_std_{i}" for i in range(n_probe)] + TAIL_COLUMNS


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def export_records(records: list[MetricsRecord], path, fmt: str = CSV_FORMAT) -> Path:
    """Write records with a stable column order; an empty list yields a
    header-only csv (or an empty json-lines file)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == JSONL_FORMAT:
        with open(path, "w") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_json_dict()) + "\n")
        return path
    if fmt != CSV_FORMAT:
        raise ValueError(f"unknown export format {fmt!r}")
    n_probe = len(records[0].probe_state_std) if records else 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_columns(n_probe))
        for rec in records:
            if len(rec.probe_state_std) != n_probe:
                raise ValueError("records must share one probe-state layout per file")
            row = [
                rec.step,
                _fmt(rec.loss),
                _fmt(rec.epsilon),
                _fmt(rec.eval_return_mean),
                _fmt(rec.eval_return_std),
                _fmt(rec.success_rate),
                _fmt(rec.collision_rate),
                _fmt(rec.timeout_rate),
                *[_fmt(v) for v in rec.probe_state_std],
                _fmt(rec.wall_clock),
                rec.note,
            ]
            writer.writerow(row)
    return path


def load_records(path, fmt: str | None = None) -> list[MetricsRecord]:
    path = Path(path)
    if fmt is None:
        fmt = JSONL_FORMAT if path.suffix in (".jsonl", ".ndjson") else CSV_FORMAT
    if fmt == JSONL_FORMAT:
        records = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(MetricsRecord.from_json_dict(json.loads(line)))
        return records
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return records
        probe_cols = [c for c in header if c.startswith("probe_state_std_")]
        for row in reader:
            vals = dict(zip(header, row))
            records.append(
                MetricsRecord(
                    step=int(vals["step"]),
                    loss=float(vals["loss"]) if vals["loss"] != "" else None,
                    epsilon=float(vals["epsilon"]),
                    eval_return_mean=float(vals["eval_return_mean"]),
                    eval_return_std=float(vals["eval_return_std"]),
                    success_rate=float(vals["success_rate"]),
                    collision_rate=float(vals["collision_rate"]),
                    timeout_rate=float(vals["timeout_rate"]),
                    probe_state_std=tuple(float(vals[c]) for c in probe_cols),
                    wall_clock=float(vals["wall_clock"]),
                    note=vals["note"],
                )
            )
    return records


def append_record_jsonl(path, record: MetricsRecord) -> None:
    """Crash-safe incremental write: one flushed json line per record."""
    with open(path, "a") as fh:
        fh.write(json.dumps(record.to_json_dict()) + "\n")
        fh.flush()


def degeneration_report(quantile_fn, gamma: float, taus: np.ndarray = PROBE_TAUS) -> dict:
    """Spread of the represented return distribution at each live chain state.

    `quantile_fn(state, taus) -> values` may be a trained network probe or the
    exact oracle; the gap compares the probe-grid std against the same grid
    evaluated on the true quantiles, so plugging the oracle in yields gap 0.
    """
    taus = np.asarray(taus, dtype=np.float64)
    report = {"taus": taus.tolist(), "states": {}}
    for state in (0, 1, 2):
        values = np.asarray(quantile_fn(state, taus), dtype=np.float64)
        true_values = true_return_quantiles(state, gamma, taus)
        std = float(values.std())
        true_grid_std = float(true_values.std())
        report["states"][state] = {
            "std": std,
            "true_grid_std": true_grid_std,
            "gap": abs(std - true_grid_std),
            "true_std_exact": true_return_std(state, gamma),
            "values": values.tolist(),
            "true_values": true_values.tolist(),
        }
    return report

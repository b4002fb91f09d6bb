from .agent import (
    AgentConfig,
    DistributionalAgent,
    DqnAgent,
    ExplorationSchedule,
    FRACTION_MARGIN,
    build_agent,
    greedy_actions,
    sample_fractions,
)
from .networks import QuantileNetwork, ScalarQNetwork
from .replay import ReplayBuffer, Transition
from .snapshot import SNAPSHOT_VERSION, SnapshotError, load_snapshot, read_meta, save_snapshot

__all__ = [
    "AgentConfig",
    "DistributionalAgent",
    "DqnAgent",
    "ExplorationSchedule",
    "FRACTION_MARGIN",
    "build_agent",
    "greedy_actions",
    "sample_fractions",
    "QuantileNetwork",
    "ScalarQNetwork",
    "ReplayBuffer",
    "Transition",
    "SNAPSHOT_VERSION",
    "SnapshotError",
    "load_snapshot",
    "read_meta",
    "save_snapshot",
]

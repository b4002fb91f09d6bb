"""Desk-scale distributional RL with a Wasserstein-robust quantile correction.

Subpackages: `autodiff` (tape-based reverse mode), `agents` (RQIQN/IQN/DQN),
`envs` (chain MDP, vortex-flow navigation). Top-level modules: `losses`,
`robust`, `verify` (brute-force oracles), `metrics`, `config`, `runner`,
`report`, `cli`.
"""

__version__ = "0.1.0"

from . import agents, autodiff, config, envs, losses, metrics, robust, runner, verify

__all__ = [
    "__version__",
    "agents",
    "autodiff",
    "config",
    "envs",
    "losses",
    "metrics",
    "robust",
    "runner",
    "verify",
]

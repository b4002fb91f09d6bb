from .chain import (
    ChainConfig,
    ChainEnv,
    MIXTURE_VARIANCE,
    chain_step,
    mixture_cdf,
    mixture_quantile,
    one_hot,
    sample_mixture,
    true_return_quantiles,
    true_return_std,
)
from .navigation import (
    COLLISION,
    SUCCESS,
    TIMEOUT,
    EpisodeOutcome,
    Layout,
    NavConfig,
    NavEnv,
    Observation,
    Obstacle,
    Vortex,
    lidar_scan,
    load_layouts,
    sample_layout,
    save_layouts,
    vortex_velocity,
)

__all__ = [
    "ChainConfig",
    "ChainEnv",
    "MIXTURE_VARIANCE",
    "chain_step",
    "mixture_cdf",
    "mixture_quantile",
    "one_hot",
    "sample_mixture",
    "true_return_quantiles",
    "true_return_std",
    "COLLISION",
    "SUCCESS",
    "TIMEOUT",
    "EpisodeOutcome",
    "Layout",
    "NavConfig",
    "NavEnv",
    "Observation",
    "Obstacle",
    "Vortex",
    "lidar_scan",
    "load_layouts",
    "sample_layout",
    "save_layouts",
    "vortex_velocity",
]

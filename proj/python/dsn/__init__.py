"""Delta schema network on grid Breakout (C++ core)."""

from ._dsn import (
    Breakout,
    BreakoutConfig,
    ConfigError,
    EpisodeRecord,
    ParameterSet,
    RunConfig,
    load_params,
    mean_reward,
    metrics_csv,
    parse_config,
    plan,
    predict,
    run_eval,
    run_training,
    save_params,
)

__all__ = [
    "Breakout",
    "BreakoutConfig",
    "ConfigError",
    "EpisodeRecord",
    "ParameterSet",
    "RunConfig",
    "load_params",
    "mean_reward",
    "metrics_csv",
    "parse_config",
    "plan",
    "predict",
    "run_eval",
    "run_training",
    "save_params",
]

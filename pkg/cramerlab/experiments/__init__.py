"""
Experiments: episode runs, sweeps, replays and plots.
"""

from cramerlab.experiments.plotting import plot_returns, plot_run
from cramerlab.experiments.records import (
    DIVERGENCE_HEADER,
    PREDICTION_HEADER,
    RUN_HEADER,
    DivergenceRecord,
    PredictionRecord,
    RunRecord,
    SweepCell,
    read_run_csv,
    write_run_csv,
)
from cramerlab.experiments.runner import (
    ExperimentRunner,
    ReplayResult,
    RunResult,
    replay_run,
    run_seed,
    run_sweep,
    sweep_grid,
)

__all__ = [
    "DIVERGENCE_HEADER",
    "PREDICTION_HEADER",
    "RUN_HEADER",
    "DivergenceRecord",
    "ExperimentRunner",
    "PredictionRecord",
    "ReplayResult",
    "RunRecord",
    "RunResult",
    "SweepCell",
    "plot_returns",
    "plot_run",
    "read_run_csv",
    "replay_run",
    "run_seed",
    "run_sweep",
    "sweep_grid",
    "write_run_csv",
]

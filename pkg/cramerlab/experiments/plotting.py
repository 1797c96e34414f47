"""
Static SVG plots of episode returns.

Uses matplotlib's Agg backend with a fixed SVG hash salt and no date
metadata, so the same CSVs always render to the same file.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from loguru import logger  # noqa: E402

from cramerlab.errors import ConfigError  # noqa: E402
from cramerlab.experiments.records import (  # noqa: E402
    RUN_HEADER,
    RunRecord,
    mean_returns_by_episode,
    read_run_csv,
)

SVG_SALT = "cramerlab"


def find_run_csvs(run_dir: str | Path) -> Dict[str, Path]:
    """Episode CSVs in run_dir keyed by algorithm (file stem)."""
    found: Dict[str, Path] = {}
    for path in sorted(Path(run_dir).glob("*.csv")):
        with open(path, "r") as f:
            header = f.readline().strip()
        if header == ",".join(RUN_HEADER):
            found[path.stem] = path
    return found


def plot_returns(
    runs: Dict[str, List[RunRecord]], out_path: str | Path, title: Optional[str] = None
) -> Path:
    """Mean return across seeds per episode, one line per algorithm."""
    plt.rcParams["svg.hashsalt"] = SVG_SALT
    fig, ax = plt.subplots(figsize=(8, 5))
    for algorithm, records in runs.items():
        means = mean_returns_by_episode(records)
        ax.plot(list(means.keys()), list(means.values()), label=algorithm, linewidth=1.2)

    ax.set_xlabel("episode")
    ax.set_ylabel("mean return")
    if title:
        ax.set_title(title)
    ax.legend(loc="best")
    ax.grid(alpha=0.3)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Plot written to {out_path}")
    return out_path


def plot_run(run_dir: str | Path, out_path: Optional[str | Path] = None) -> Path:
    """
    Plot every episode CSV of a run directory to returns.svg.

    Raises:
        ConfigError: If run_dir holds no episode CSV
    """
    run_dir = Path(run_dir)
    csvs = find_run_csvs(run_dir)
    if not csvs:
        raise ConfigError(f"no episode CSVs found in {run_dir}")
    runs = {algorithm: read_run_csv(path) for algorithm, path in csvs.items()}
    return plot_returns(runs, out_path or run_dir / "returns.svg", title=run_dir.name)

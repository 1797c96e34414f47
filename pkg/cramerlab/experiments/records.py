"""
Result records and their file formats.

Episode CSVs keep a fixed column order so downstream scripts never have
to sniff headers; every row and every report carries the config hash.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence

from cramerlab.errors import ConfigError

RUN_HEADER = ("seed", "episode", "return", "length", "wallclock_ms", "config_hash")
PREDICTION_HEADER = (
    "seed",
    "episode",
    "algorithm",
    "state",
    "action",
    "expectation",
    "total_mass",
    "config_hash",
)
DIVERGENCE_HEADER = ("algorithm", "seed", "episode", "config_hash")
SWEEP_HEADER = (
    "algorithm",
    "learning_rate",
    "fourier_order",
    "mean_return",
    "final_mean_return",
    "config_hash",
)


@dataclass(frozen=True)
class RunRecord:
    """One finished episode."""

    seed: int
    episode: int
    episode_return: float
    length: int
    wallclock_ms: float
    config_hash: str

    def row(self) -> List[str]:
        return [
            str(self.seed),
            str(self.episode),
            repr(float(self.episode_return)),
            str(self.length),
            repr(float(self.wallclock_ms)),
            self.config_hash,
        ]

    @classmethod
    def from_row(cls, row: Mapping[str, str]) -> RunRecord:
        return cls(
            int(row["seed"]),
            int(row["episode"]),
            float(row["return"]),
            int(row["length"]),
            float(row["wallclock_ms"]),
            row["config_hash"],
        )


@dataclass(frozen=True)
class PredictionRecord:
    """Expectation and total mass of one arm's prediction at the probe pair."""

    seed: int
    episode: int
    algorithm: str
    state: int
    action: int
    expectation: float
    total_mass: float
    config_hash: str

    def row(self) -> List[str]:
        return [
            str(self.seed),
            str(self.episode),
            self.algorithm,
            str(self.state),
            str(self.action),
            repr(float(self.expectation)),
            repr(float(self.total_mass)),
            self.config_hash,
        ]


@dataclass(frozen=True)
class DivergenceRecord:
    """An agent seed that stopped at episode because its predictions blew up."""

    algorithm: str
    seed: int
    episode: int
    config_hash: str

    def row(self) -> List[str]:
        return [self.algorithm, str(self.seed), str(self.episode), self.config_hash]


@dataclass(frozen=True)
class SweepCell:
    algorithm: str
    learning_rate: float
    fourier_order: int
    mean_return: float
    final_mean_return: float
    config_hash: str

    def row(self) -> List[str]:
        return [
            self.algorithm,
            repr(float(self.learning_rate)),
            str(self.fourier_order),
            repr(float(self.mean_return)),
            repr(float(self.final_mean_return)),
            self.config_hash,
        ]


def _write(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_run_csv(path: str | Path, records: Sequence[RunRecord]) -> Path:
    return _write(Path(path), RUN_HEADER, (r.row() for r in records))


def write_predictions_csv(path: str | Path, records: Sequence[PredictionRecord]) -> Path:
    return _write(Path(path), PREDICTION_HEADER, (r.row() for r in records))


def write_divergences_csv(path: str | Path, records: Sequence[DivergenceRecord]) -> Path:
    return _write(Path(path), DIVERGENCE_HEADER, (r.row() for r in records))


def write_sweep_csv(path: str | Path, cells: Sequence[SweepCell]) -> Path:
    return _write(Path(path), SWEEP_HEADER, (c.row() for c in cells))


def read_run_csv(path: str | Path) -> List[RunRecord]:
    """
    Raises:
        ConfigError: If the header is not the episode schema
    """
    with open(path, "r", newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != RUN_HEADER:
            raise ConfigError(f"{path} is not an episode CSV (header {reader.fieldnames})")
        return [RunRecord.from_row(row) for row in reader]


def write_json(path: str | Path, payload: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return path


def records_to_dicts(records: Sequence[Any]) -> List[Dict[str, Any]]:
    return [asdict(r) for r in records]


def mean_returns_by_episode(records: Sequence[RunRecord]) -> Dict[int, float]:
    """Mean return across seeds for each episode index."""
    totals: Dict[int, List[float]] = {}
    for record in records:
        totals.setdefault(record.episode, []).append(record.episode_return)
    return {episode: sum(v) / len(v) for episode, v in sorted(totals.items())}
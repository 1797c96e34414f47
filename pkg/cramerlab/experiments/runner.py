"""
Experiment runner: episodes across seeds, per-algorithm result files.

Tabular arms (q-learning, tabular-cdf, tabular-pmf, tabular-mixture)
start from the same zero values and act epsilon-greedily on their own
predictions from a source seeded identically, so arms that stay
expectation-equivalent take identical trajectories. Lite agents run on
CartPole or Acrobot with Fourier or MLP features.
"""

from __future__ import annotations

import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from cramerlab.config.experiment_config import ExperimentConfig
from cramerlab.core import Support
from cramerlab.coupling.rules import UpdateRule, make_rule
from cramerlab.envs.base import Environment
from cramerlab.envs.env_factory import make_env
from cramerlab.envs.features import FourierBasis
from cramerlab.envs.finite_mdp import FiniteMDP
from cramerlab.envs.policies import EpsilonGreedyPolicy
from cramerlab.envs.sampling import SampleSource, begin_episode, sample_transition
from cramerlab.errors import DivergenceError, EnvFailure
from cramerlab.experiments.records import (
    DivergenceRecord,
    PredictionRecord,
    RunRecord,
    SweepCell,
    read_run_csv,
    records_to_dicts,
    write_json,
    write_divergences_csv,
    write_predictions_csv,
    write_run_csv,
    write_sweep_csv,
)
from cramerlab.learners.agents import AgentConfig, MLPAgent, run_episode
from cramerlab.learners.tabular import CategoricalZTable, QTable

TABULAR_RULES = {
    "q-learning": "sarsa",
    "tabular-cdf": "cdf-gradient",
    "tabular-pmf": "pmf-gradient",
    "tabular-mixture": "projected-mixture",
}
DEFAULT_MLP_HIDDEN = (64, 64)
FINAL_WINDOW = 100
OUTPUT_FORMATS = ("csv", "json")
AUX_CSVS = ("predictions.csv", "divergences.csv")


@dataclass
class SeedResult:
    algorithm: str
    seed: int
    records: List[RunRecord]
    predictions: List[PredictionRecord] = field(default_factory=list)
    diverged_at: Optional[int] = None


@dataclass
class RunResult:
    """Everything one run wrote, keyed by algorithm."""

    config_hash: str
    run_dir: Path
    records: Dict[str, List[RunRecord]]
    files: List[Path] = field(default_factory=list)
    divergences: List[DivergenceRecord] = field(default_factory=list)

    def final_mean(self, algorithm: str, window: int = FINAL_WINDOW) -> float:
        """Mean return of the last window episodes, pooled over seeds; NaN with no episodes."""
        records = self.records[algorithm]
        if not records:
            return float("nan")
        last = max(r.episode for r in records)
        tail = [r.episode_return for r in records if r.episode > last - window]
        return float(np.mean(tail))


def build_env(config: ExperimentConfig) -> Environment:
    """
    Raises:
        EnvFailure: If the environment cannot be built
    """
    params: Dict[str, Any] = {}
    if config.gamma is not None:
        params["gamma"] = config.gamma
    if config.max_steps is not None:
        params["max_steps"] = config.max_steps
    try:
        return make_env(config.env, **params)
    except ValueError as e:
        raise EnvFailure(f"cannot build environment {config.env}: {e}") from e


def goal_pair(mdp: FiniteMDP) -> Tuple[int, int]:
    """The highest-paying (state, action), last one on ties: the move into the goal."""
    flat = mdp.expected_reward().ravel()
    index = flat.size - 1 - int(np.argmax(flat[::-1]))
    x, a = divmod(index, mdp.n_actions)
    return x, a


def tabular_rule(config: ExperimentConfig, algorithm: str, mdp: FiniteMDP) -> UpdateRule:
    """Zero-initialized learner for a tabular arm; distributional arms start at Dirac 0."""
    zeros = np.zeros((mdp.n_states, mdp.n_actions))
    if algorithm == "q-learning":
        state: Any = QTable(zeros)
    else:
        half_width = config.v_max if config.v_max is not None else mdp.value_bound
        support = Support.uniform(-half_width, half_width, config.n_atoms)
        state = CategoricalZTable.from_values(zeros, support)
    return make_rule(TABULAR_RULES[algorithm], state, config.learning_rate, q_learning=True)


def _prediction_at(rule: UpdateRule, x: int, a: int) -> Tuple[float, float]:
    state = rule.state  # type: ignore[attr-defined]
    if isinstance(state, QTable):
        return float(state.values[x, a]), 1.0
    dist = state.dist(x, a)
    return dist.expectation(), dist.total_mass


def _elapsed_ms(start: float, config: ExperimentConfig) -> float:
    return round((time.perf_counter() - start) * 1000.0, 3) if config.record_wallclock else 0.0


def _log_progress(
    config: ExperimentConfig, algorithm: str, seed: int, records: List[RunRecord]
) -> None:
    episode = records[-1].episode + 1
    if config.log_every > 0 and episode % config.log_every == 0:
        window = records[-config.log_every :]
        mean = sum(r.episode_return for r in window) / len(window)
        logger.info(
            f"[{algorithm} seed {seed}] episode {episode}/{config.episodes}: "
            f"mean return {mean:.3f} over last {len(window)}"
        )


def run_tabular_seed(config: ExperimentConfig, algorithm: str, seed: int) -> SeedResult:
    env = build_env(config)
    assert isinstance(env, FiniteMDP)
    rule = tabular_rule(config, algorithm, env)
    policy = EpsilonGreedyPolicy(rule.action_values, config.epsilon)
    source = SampleSource(seed)
    config_hash = config.config_hash()
    probe_x, probe_a = goal_pair(env)

    result = SeedResult(algorithm, seed, [])
    for episode in range(config.episodes):
        start = time.perf_counter()
        begin_episode(env, policy, source)
        episode_return, length = 0.0, 0
        while not env.done:
            t = sample_transition(env, policy, source)
            rule.update(t)
            episode_return += t.r
            length += 1

        elapsed = _elapsed_ms(start, config)
        result.records.append(
            RunRecord(seed, episode, episode_return, length, elapsed, config_hash)
        )
        expectation, mass = _prediction_at(rule, probe_x, probe_a)
        result.predictions.append(
            PredictionRecord(
                seed, episode, algorithm, probe_x, probe_a, expectation, mass, config_hash
            )
        )
        _log_progress(config, algorithm, seed, result.records)
    return result


def agent_inputs(config: ExperimentConfig, env: Environment) -> Tuple[Optional[FourierBasis], int]:
    """Encoder and input width for an agent arm."""
    state_dim = int(getattr(env, "state_dim"))
    if config.features == "fourier":
        basis = FourierBasis(config.fourier_order, getattr(env, "bounds"))
        logger.info(
            f"Fourier order {config.fourier_order} on a {state_dim}-dim state: "
            f"{basis.n_features} features"
        )
        return basis, basis.n_features
    return None, state_dim


def agent_config(config: ExperimentConfig, algorithm: str, seed: int) -> AgentConfig:
    hidden = tuple(config.hidden)
    if config.features == "mlp" and not hidden:
        hidden = DEFAULT_MLP_HIDDEN
    return AgentConfig.from_algorithm(
        algorithm,
        hidden=hidden,
        learning_rate=config.learning_rate,
        optimizer=config.optimizer,
        batch_size=config.batch_size,
        buffer_capacity=config.buffer_capacity,
        target_sync=config.target_sync,
        n_atoms=config.n_atoms,
        v_max=config.v_max,
        s51_init=config.s51_init,
        epsilon_start=config.epsilon_start,
        epsilon_end=config.epsilon_end,
        epsilon_decay_steps=config.epsilon_decay_steps,
        seed=seed,
    )


def run_agent_seed(config: ExperimentConfig, algorithm: str, seed: int) -> SeedResult:
    """A seed whose predictions stop being finite ends there, keeping its finished episodes."""
    env = build_env(config)
    encoder, input_dim = agent_inputs(config, env)
    agent = MLPAgent(
        agent_config(config, algorithm, seed), input_dim, env.n_actions, encoder, env.value_bound
    )
    source = SampleSource(seed)
    config_hash = config.config_hash()

    result = SeedResult(algorithm, seed, [])
    for episode in range(config.episodes):
        start = time.perf_counter()
        try:
            stats = run_episode(agent, env, source)
        except DivergenceError as e:
            logger.error(f"[{algorithm} seed {seed}] diverged in episode {episode}, stopping: {e}")
            result.diverged_at = episode
            break
        result.records.append(
            RunRecord(
                seed,
                episode,
                stats.episode_return,
                stats.length,
                _elapsed_ms(start, config),
                config_hash,
            )
        )
        _log_progress(config, algorithm, seed, result.records)
    return result


def run_seed(config: ExperimentConfig, algorithm: str, seed: int) -> SeedResult:
    """One algorithm on one seed; module-level so worker processes can pickle it."""
    if algorithm in TABULAR_RULES:
        return run_tabular_seed(config, algorithm, seed)
    return run_agent_seed(config, algorithm, seed)


class ExperimentRunner:
    """
    Runs every algorithm of an experiment over its seeds and writes the results.

    Output layout under <out_dir>/<name>/:
        config.yaml          the exact config, for replay
        <algorithm>.csv      one row per episode (or .json with output_format="json")
        predictions.csv      probe-pair predictions of tabular arms
        divergences.csv      agent seeds stopped early by non-finite predictions
    """

    def __init__(
        self,
        config: ExperimentConfig,
        out_dir: Optional[str | Path] = None,
        workers: Optional[int] = None,
        output_format: str = "csv",
    ) -> None:
        if output_format not in OUTPUT_FORMATS:
            raise ValueError(
                f"Unknown format: {output_format}. Valid options: {', '.join(OUTPUT_FORMATS)}"
            )
        self.config = config
        self.out_dir = Path(out_dir if out_dir is not None else config.output_dir)
        self.run_dir = self.out_dir / config.name
        self.workers = max(1, workers if workers is not None else config.workers)
        self.output_format = output_format
        self.config_hash = config.config_hash()

    def _run_seeds(self, algorithm: str) -> List[SeedResult]:
        seeds = list(self.config.seeds)
        if self.workers > 1 and len(seeds) > 1:
            with ProcessPoolExecutor(max_workers=min(self.workers, len(seeds))) as pool:
                return list(
                    pool.map(run_seed, [self.config] * len(seeds), [algorithm] * len(seeds), seeds)
                )
        return [run_seed(self.config, algorithm, seed) for seed in seeds]

    def run(self) -> RunResult:
        """
        Raises:
            EnvFailure: If an environment cannot be built or stepped
        """
        logger.info(
            f"Running experiment '{self.config.name}' on {self.config.env} "
            f"(config hash {self.config_hash}, seeds {self.config.seeds})"
        )
        self.run_dir.mkdir(parents=True, exist_ok=True)
        result = RunResult(self.config_hash, self.run_dir, {})
        self.config.to_yaml(self.run_dir / "config.yaml")
        result.files.append(self.run_dir / "config.yaml")

        predictions: List[PredictionRecord] = []
        for algorithm in self.config.algorithms:
            per_seed = self._run_seeds(algorithm)
            records = [r for seed_result in per_seed for r in seed_result.records]
            predictions.extend(p for seed_result in per_seed for p in seed_result.predictions)
            result.records[algorithm] = records
            result.divergences.extend(
                DivergenceRecord(algorithm, s.seed, s.diverged_at, self.config_hash)
                for s in per_seed
                if s.diverged_at is not None
            )
            result.files.append(self._write_records(algorithm, records))
            logger.info(
                f"{algorithm}: {len(records)} episodes, "
                f"final mean return {result.final_mean(algorithm):.3f}"
            )

        if predictions:
            result.files.append(
                write_predictions_csv(self.run_dir / "predictions.csv", predictions)
            )
        if result.divergences:
            result.files.append(
                write_divergences_csv(self.run_dir / "divergences.csv", result.divergences)
            )
        return result

    def _write_records(self, algorithm: str, records: List[RunRecord]) -> Path:
        if self.output_format == "json":
            payload = {
                "algorithm": algorithm,
                "config_hash": self.config_hash,
                "records": records_to_dicts(records),
            }
            return write_json(self.run_dir / f"{algorithm}.json", payload)
        return write_run_csv(self.run_dir / f"{algorithm}.csv", records)

    def get_status(self) -> Dict[str, Any]:
        return {
            "name": self.config.name,
            "env": self.config.env,
            "algorithms": list(self.config.algorithms),
            "seeds": list(self.config.seeds),
            "config_hash": self.config_hash,
            "run_dir": str(self.run_dir),
            "workers": self.workers,
        }


def sweep_grid(config: ExperimentConfig) -> List[Tuple[float, int]]:
    """(learning_rate, fourier_order) cells; orders only vary for Fourier features."""
    rates = config.sweep_learning_rates or [config.learning_rate]
    orders = config.sweep_orders if config.features == "fourier" and config.sweep_orders else []
    return [(rate, order) for rate in rates for order in (orders or [config.fourier_order])]


def run_sweep(
    config: ExperimentConfig, out_dir: Optional[str | Path] = None, workers: Optional[int] = None
) -> List[SweepCell]:
    """Run every grid cell and record all of them in <out>/<name>/sweep.csv."""
    root = Path(out_dir if out_dir is not None else config.output_dir) / config.name
    cells: List[SweepCell] = []
    grid = sweep_grid(config)
    logger.info(f"Sweeping '{config.name}' over {len(grid)} cells")

    for rate, order in grid:
        cell_config = config.with_overrides(
            name=f"lr{rate:g}_order{order}",
            learning_rate=rate,
            fourier_order=order,
            sweep_learning_rates=[],
            sweep_orders=[],
        )
        result = ExperimentRunner(cell_config, root / "cells", workers).run()
        for algorithm, records in result.records.items():
            returns = [r.episode_return for r in records]
            cells.append(
                SweepCell(
                    algorithm,
                    rate,
                    order,
                    float(np.mean(returns)) if returns else float("nan"),
                    result.final_mean(algorithm),
                    result.config_hash,
                )
            )
    write_sweep_csv(root / "sweep.csv", cells)
    return cells


@dataclass
class ReplayResult:
    run_dir: Path
    compared: List[str]
    mismatched: List[str]

    @property
    def identical(self) -> bool:
        return bool(self.compared) and not self.mismatched


def _comparable(path: Path, drop_wallclock: bool) -> bytes:
    if drop_wallclock and path.suffix == ".csv" and path.name not in AUX_CSVS:
        rows = [(r.seed, r.episode, r.episode_return, r.length) for r in read_run_csv(path)]
        return repr(rows).encode()
    return path.read_bytes()


def replay_run(run_dir: str | Path, workers: Optional[int] = None) -> ReplayResult:
    """
    Re-run the config stored in run_dir and compare every result file.

    Files must match byte for byte; with record_wallclock set the
    wallclock column is left out of the comparison.

    Raises:
        ConfigError: If run_dir has no readable config.yaml
    """
    run_dir = Path(run_dir)
    config = ExperimentConfig.from_yaml(run_dir / "config.yaml")
    output_format = "json" if any(run_dir.glob("*.json")) else "csv"
    if config.record_wallclock:
        logger.warning("record_wallclock is set: comparing results without the wallclock column")

    with tempfile.TemporaryDirectory() as tmp:
        ExperimentRunner(config, tmp, workers, output_format).run()
        fresh_dir = Path(tmp) / config.name
        result = ReplayResult(run_dir, [], [])
        for fresh in sorted(fresh_dir.iterdir()):
            stored = run_dir / fresh.name
            result.compared.append(fresh.name)
            drop = config.record_wallclock
            if not stored.exists() or _comparable(stored, drop) != _comparable(fresh, drop):
                result.mismatched.append(fresh.name)

    if result.identical:
        logger.info(f"Replay of {run_dir} reproduced {len(result.compared)} files exactly")
    else:
        logger.error(f"Replay of {run_dir} differs in: {', '.join(result.mismatched)}")
    return result

"""
Tests for experiment runs, result files, sweeps, replays and plots.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from cramerlab.config import ExperimentConfig
from cramerlab.envs import gridworld
from cramerlab.errors import ConfigError, DivergenceError, EnvFailure
from cramerlab.experiments import (
    DIVERGENCE_HEADER,
    RUN_HEADER,
    DivergenceRecord,
    ExperimentRunner,
    plot_run,
    read_run_csv,
    replay_run,
    run_sweep,
    sweep_grid,
)
from cramerlab.experiments import runner
from cramerlab.experiments.runner import build_env, goal_pair

EXPERIMENTS = Path(__file__).resolve().parent.parent / "config" / "experiments"


def _gridworld_config(**changes):
    base = {
        "name": "grid",
        "env": "gridworld12",
        "algorithms": ["q-learning", "tabular-cdf"],
        "episodes": 4,
        "seeds": [0],
        "log_every": 0,
    }
    base.update(changes)
    return ExperimentConfig.from_dict(base)


def _cartpole_config(**changes):
    base = {
        "name": "cartpole",
        "env": "cartpole",
        "features": "fourier",
        "fourier_order": 1,
        "algorithms": ["dqn-lite", "s51-lite-cdf"],
        "optimizer": "sgd",
        "learning_rate": 0.01,
        "batch_size": 8,
        "buffer_capacity": 200,
        "episodes": 3,
        "seeds": [0],
        "log_every": 0,
    }
    base.update(changes)
    return ExperimentConfig.from_dict(base)


def test_goal_pair_is_the_move_into_the_goal():
    assert goal_pair(gridworld()) == (142, 0)


def test_q_learning_and_cdf_arms_share_trajectories(tmp_path):
    """Equivalent tabular arms on one seed produce the same episodes."""
    result = ExperimentRunner(_gridworld_config(), tmp_path).run()

    q_rows = result.records["q-learning"]
    cdf_rows = result.records["tabular-cdf"]
    assert [r.length for r in q_rows] == [r.length for r in cdf_rows]
    assert [r.episode_return for r in q_rows] == [r.episode_return for r in cdf_rows]


def test_run_writes_expected_files(tmp_path):
    config = _gridworld_config()
    result = ExperimentRunner(config, tmp_path).run()
    run_dir = tmp_path / "grid"

    assert result.run_dir == run_dir
    for name in ("config.yaml", "q-learning.csv", "tabular-cdf.csv", "predictions.csv"):
        assert (run_dir / name).exists(), f"{name} missing"

    header = (run_dir / "q-learning.csv").read_text().splitlines()[0]
    assert header == ",".join(RUN_HEADER)
    records = read_run_csv(run_dir / "q-learning.csv")
    assert len(records) == config.episodes
    assert all(r.config_hash == config.config_hash() for r in records)
    assert all(r.wallclock_ms == 0.0 for r in records)


def test_rerun_is_byte_identical(tmp_path):
    config = _gridworld_config(algorithms=["q-learning", "tabular-pmf"], seeds=[0, 1])
    ExperimentRunner(config, tmp_path / "a").run()
    ExperimentRunner(config, tmp_path / "b").run()

    for name in ("q-learning.csv", "tabular-pmf.csv", "predictions.csv"):
        first = (tmp_path / "a" / "grid" / name).read_bytes()
        second = (tmp_path / "b" / "grid" / name).read_bytes()
        assert first == second, f"{name} differs between runs"


def test_parallel_run_matches_serial(tmp_path):
    config = _gridworld_config(algorithms=["q-learning"], seeds=[0, 1, 2])
    ExperimentRunner(config, tmp_path / "serial", workers=1).run()
    ExperimentRunner(config, tmp_path / "parallel", workers=2).run()
    serial = (tmp_path / "serial" / "grid" / "q-learning.csv").read_bytes()
    parallel = (tmp_path / "parallel" / "grid" / "q-learning.csv").read_bytes()
    assert serial == parallel


def test_replay_reproduces_run(tmp_path):
    ExperimentRunner(_gridworld_config(), tmp_path).run()
    result = replay_run(tmp_path / "grid")

    assert result.identical, f"mismatched: {result.mismatched}"
    assert "q-learning.csv" in result.compared


def test_replay_detects_tampering(tmp_path):
    ExperimentRunner(_gridworld_config(), tmp_path).run()
    csv_path = tmp_path / "grid" / "q-learning.csv"
    lines = csv_path.read_text().splitlines()
    fields = lines[1].split(",")
    fields[3] = str(int(fields[3]) + 1)
    lines[1] = ",".join(fields)
    csv_path.write_text("\n".join(lines) + "\n")

    result = replay_run(tmp_path / "grid")
    assert not result.identical
    assert result.mismatched == ["q-learning.csv"]


def test_json_output(tmp_path):
    ExperimentRunner(_gridworld_config(), tmp_path, output_format="json").run()
    payload = json.loads((tmp_path / "grid" / "q-learning.json").read_text())
    assert payload["algorithm"] == "q-learning"
    assert len(payload["records"]) == 4

    with pytest.raises(ValueError):
        ExperimentRunner(_gridworld_config(), tmp_path, output_format="xml")


def test_predictions_track_total_mass(tmp_path):
    """The CDF arm keeps unit mass at the goal pair."""
    ExperimentRunner(_gridworld_config(), tmp_path).run()
    lines = (tmp_path / "grid" / "predictions.csv").read_text().splitlines()
    rows = [line.split(",") for line in lines[1:]]
    cdf_masses = [float(row[6]) for row in rows if row[2] == "tabular-cdf"]
    assert cdf_masses and all(abs(m - 1.0) < 1e-9 for m in cdf_masses)


def test_agent_arms_run_on_cartpole(tmp_path):
    result = ExperimentRunner(_cartpole_config(), tmp_path).run()
    for algorithm in ("dqn-lite", "s51-lite-cdf"):
        records = result.records[algorithm]
        assert len(records) == 3
        assert all(r.episode_return == r.length for r in records), "CartPole pays 1 per step"
    assert not (tmp_path / "cartpole" / "predictions.csv").exists()


def test_sweep_grid():
    config = _cartpole_config(sweep_learning_rates=[0.001, 0.01], sweep_orders=[1, 2])
    assert sweep_grid(config) == [(0.001, 1), (0.001, 2), (0.01, 1), (0.01, 2)]
    assert sweep_grid(_gridworld_config()) == [(0.1, 4)]


def test_run_sweep_writes_every_cell(tmp_path):
    config = _gridworld_config(
        env="chain3", algorithms=["q-learning"], sweep_learning_rates=[0.1, 0.5], episodes=2
    )
    cells = run_sweep(config, tmp_path)

    assert [(c.algorithm, c.learning_rate) for c in cells] == [
        ("q-learning", 0.1),
        ("q-learning", 0.5),
    ]
    assert (tmp_path / "grid" / "sweep.csv").exists()
    assert (tmp_path / "grid" / "cells" / "lr0.1_order4" / "q-learning.csv").exists()


def test_plot_is_deterministic(tmp_path):
    ExperimentRunner(_gridworld_config(), tmp_path).run()
    first = plot_run(tmp_path / "grid").read_bytes()
    second = plot_run(tmp_path / "grid", tmp_path / "again.svg").read_bytes()
    assert first.startswith(b"<?xml")
    assert first == second


def test_plot_needs_episode_csvs(tmp_path):
    with pytest.raises(ConfigError):
        plot_run(tmp_path)


def test_read_run_csv_rejects_other_tables(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ConfigError):
        read_run_csv(path)


def test_build_env_wraps_failures():
    config = _gridworld_config()
    config.gamma = 1.5
    with pytest.raises(EnvFailure):
        build_env(config)


@pytest.mark.slow
def test_gridworld_arms_match_over_200_episodes(tmp_path):
    config = _gridworld_config(episodes=200)
    result = ExperimentRunner(config, tmp_path).run()
    q_lengths = [r.length for r in result.records["q-learning"]]
    cdf_lengths = [r.length for r in result.records["tabular-cdf"]]
    assert q_lengths == cdf_lengths


def test_diverged_seed_is_recorded_not_raised(tmp_path, monkeypatch):
    real_episode = runner.run_episode
    calls = []

    def blows_up_on_second_episode(agent, env, source):
        calls.append(1)
        if len(calls) == 2:
            raise DivergenceError("action values are not finite: [nan nan]")
        return real_episode(agent, env, source)

    monkeypatch.setattr(runner, "run_episode", blows_up_on_second_episode)
    config = _cartpole_config(algorithms=["s51-lite-pmf"])
    result = ExperimentRunner(config, tmp_path).run()

    assert [r.episode for r in result.records["s51-lite-pmf"]] == [0]
    assert result.final_mean("s51-lite-pmf") == result.records["s51-lite-pmf"][0].episode_return
    assert result.divergences == [DivergenceRecord("s51-lite-pmf", 0, 1, config.config_hash())]
    lines = (tmp_path / "cartpole" / "divergences.csv").read_text().splitlines()
    assert lines == [",".join(DIVERGENCE_HEADER), f"s51-lite-pmf,0,1,{config.config_hash()}"]


def test_clean_run_writes_no_divergences(tmp_path):
    result = ExperimentRunner(_cartpole_config(episodes=1), tmp_path).run()
    assert result.divergences == []
    assert not (tmp_path / "cartpole" / "divergences.csv").exists()


def _by_seed(records):
    returns = {}
    for r in records:
        returns.setdefault(r.seed, []).append(r.episode_return)
    return returns


def _best_window_mean(returns, window=100):
    if len(returns) < window:
        return float("-inf")
    return float(np.max(np.convolve(returns, np.ones(window) / window, mode="valid")))


def _final_mean(returns, window=100):
    return float(np.mean(returns[-window:])) if returns else 0.0


@pytest.mark.slow
def test_cartpole_fourier_learning_curves(tmp_path):
    """DQN-lite solves CartPole on most seeds and the PMF arm trails the CDF arm."""
    config = ExperimentConfig.from_yaml(EXPERIMENTS / "cartpole_fourier.yaml").with_overrides(
        algorithms=["dqn-lite", "s51-lite-cdf", "s51-lite-pmf"], log_every=0
    )
    result = ExperimentRunner(config, tmp_path, workers=len(config.seeds)).run()

    dqn = _by_seed(result.records["dqn-lite"])
    cdf = _by_seed(result.records["s51-lite-cdf"])
    pmf = _by_seed(result.records["s51-lite-pmf"])

    solved = [seed for seed in config.seeds if _best_window_mean(dqn.get(seed, [])) >= 195.0]
    assert len(solved) >= 3, f"dqn-lite reached 195 on seeds {solved}"
    trailing = [
        seed
        for seed in config.seeds
        if _final_mean(pmf.get(seed, [])) < _final_mean(cdf.get(seed, []))
    ]
    assert len(trailing) >= 4, f"s51-lite-pmf below s51-lite-cdf on seeds {trailing}"

"""
Tests for the cramerlab command line and its exit codes.
"""

import json

import pytest
import yaml

from cramerlab.main import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main


@pytest.fixture
def lab_dir(tmp_path):
    """Lab config with small verification settings and no file logging."""
    settings = {
        "logging": {"level": "WARNING", "file_logging": False},
        "output": {"dir": str(tmp_path / "results"), "plots": True},
        "workers": 1,
        "verification": {
            "max_states": 4,
            "max_actions": 2,
            "max_reward_atoms": 3,
            "operator_iterations": 20,
            "projection_samples": 50,
        },
    }
    directory = tmp_path / "lab"
    directory.mkdir()
    (directory / "cramerlab_config.yaml").write_text(yaml.safe_dump(settings))
    return directory


@pytest.fixture
def grid_config(tmp_path):
    path = tmp_path / "grid.yaml"
    path.write_text(
        yaml.safe_dump(
            {
                "name": "grid",
                "env": "chain3",
                "algorithms": ["q-learning", "tabular-cdf"],
                "episodes": 3,
                "seeds": [0, 1],
                "log_every": 0,
            }
        )
    )
    return path


def test_help_exits_cleanly():
    assert main(["--help"]) == EXIT_OK


def test_parse_errors_are_usage_errors():
    assert main(["transmogrify"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE


def test_verify_writes_reports(lab_dir, tmp_path):
    out = tmp_path / "out"
    args = ["--lab-config", str(lab_dir), "verify", "P1", "p7", "--seed", "0"]
    code = main(args + ["--out", str(out)])

    assert code == EXIT_OK
    report = json.loads((out / "verify" / "P1.json").read_text())
    assert report["passed"] is True
    summary = (out / "verify" / "summary.csv").read_text().splitlines()
    assert summary[0] == "id,passed,expected_verdict,runs,max_gap,config_hash"
    assert [line.split(",")[0] for line in summary[1:]] == ["P1", "P7"]


def test_verify_json_summary(lab_dir, tmp_path):
    out = tmp_path / "out"
    args = ["--lab-config", str(lab_dir), "verify", "P1", "--seeds", "2", "--out", str(out)]
    assert main(args + ["--format", "json"]) == EXIT_OK

    summary = json.loads((out / "verify" / "summary.json").read_text())
    assert summary["checks"][0]["id"] == "P1"
    assert not (out / "verify" / "summary.csv").exists()


@pytest.mark.parametrize(
    "args",
    [
        ["verify"],
        ["verify", "P42"],
        ["verify", "P1", "--seeds", "0"],
    ],
)
def test_verify_usage_errors(lab_dir, tmp_path, args):
    code = main(["--lab-config", str(lab_dir)] + args + ["--out", str(tmp_path)])
    assert code == EXIT_USAGE


def test_run_missing_config_is_usage_error(lab_dir, tmp_path):
    code = main(["--lab-config", str(lab_dir), "run", "--config", str(tmp_path / "nope.yaml")])
    assert code == EXIT_USAGE


def test_run_plot_and_replay(lab_dir, grid_config, tmp_path):
    """A run can be plotted and replayed to identical files."""
    out = tmp_path / "results"
    base = ["--lab-config", str(lab_dir)]

    assert main(base + ["run", "--config", str(grid_config), "--out", str(out)]) == EXIT_OK
    run_dir = out / "grid"
    assert (run_dir / "q-learning.csv").exists()
    assert (run_dir / "returns.svg").exists()

    assert main(base + ["replay", str(run_dir)]) == EXIT_OK
    assert main(base + ["plot", str(run_dir), "--out", str(tmp_path / "p.svg")]) == EXIT_OK
    assert (tmp_path / "p.svg").exists()


def test_replay_reports_differences(lab_dir, grid_config, tmp_path):
    out = tmp_path / "results"
    base = ["--lab-config", str(lab_dir)]
    main(base + ["run", "--config", str(grid_config), "--out", str(out), "--no-plot"])

    csv_path = out / "grid" / "tabular-cdf.csv"
    csv_path.write_text(csv_path.read_text() + "0,99,0.0,1,0.0,x\n")
    assert main(base + ["replay", str(out / "grid")]) == EXIT_FAILURE


def test_seed_override_on_run(lab_dir, grid_config, tmp_path):
    out = tmp_path / "results"
    args = ["--lab-config", str(lab_dir), "run", "--config", str(grid_config), "--no-plot"]
    assert main(args + ["--seed", "5", "--out", str(out)]) == EXIT_OK

    rows = (out / "grid" / "q-learning.csv").read_text().splitlines()[1:]
    assert {row.split(",")[0] for row in rows} == {"5"}


def test_plot_of_empty_directory_is_usage_error(lab_dir, tmp_path):
    assert main(["--lab-config", str(lab_dir), "plot", str(tmp_path)]) == EXIT_USAGE

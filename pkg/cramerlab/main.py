"""
cramerlab command line.

    cramerlab verify P6 P7 --seeds 10
    cramerlab verify --all --seeds 20 --format json
    cramerlab run --config config/experiments/gridworld.yaml
    cramerlab sweep --config config/experiments/cartpole_fourier.yaml
    cramerlab replay results/gridworld
    cramerlab plot results/gridworld

Exit codes: 0 success, 1 failed verification or run failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from loguru import logger

from cramerlab.config import ConfigManager, ExperimentConfig, VerificationConfig
from cramerlab.coupling.propositions import PROPOSITIONS, PropositionReport, verify_proposition
from cramerlab.errors import ConfigError, CramerLabError, UnknownPropositionError
from cramerlab.experiments.plotting import plot_run
from cramerlab.experiments.records import SweepCell, write_json
from cramerlab.experiments.runner import ExperimentRunner, replay_run, run_sweep
from cramerlab.utils.logger import init_logger

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
DEFAULT_SEED_COUNT = 10


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cramerlab",
        description="Expected vs distributional RL: equivalence checks and experiments",
    )
    parser.add_argument("--log-level", default=None, help="Console log level (default from config)")
    parser.add_argument(
        "--lab-config", default="config", help="Directory holding cramerlab_config.yaml"
    )
    parser.add_argument("--workers", type=int, default=None, help="Processes for the seed fan-out")

    seeds = argparse.ArgumentParser(add_help=False)
    group = seeds.add_mutually_exclusive_group()
    group.add_argument("--seed", type=int, default=None, help="Run this single seed")
    group.add_argument("--seeds", type=int, default=None, help="Run seeds 0..N-1")

    output = argparse.ArgumentParser(add_help=False)
    output.add_argument("--out", default=None, help="Output directory")
    output.add_argument("--format", choices=("csv", "json"), default="csv", dest="output_format")

    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", parents=[seeds, output], help="Run equivalence checks")
    verify.add_argument("ids", nargs="*", help=f"Check ids: {', '.join(PROPOSITIONS)}")
    verify.add_argument("--all", action="store_true", help="Run every check")

    run = sub.add_parser("run", parents=[seeds, output], help="Run an experiment")
    run.add_argument("--config", required=True, help="Experiment YAML")
    run.add_argument("--no-plot", action="store_true", help="Skip the SVG plot")

    sweep = sub.add_parser("sweep", parents=[seeds, output], help="Run a declared sweep grid")
    sweep.add_argument("--config", required=True, help="Experiment YAML")

    replay = sub.add_parser("replay", help="Re-run a stored run and compare its files")
    replay.add_argument("run_dir", help="Directory written by run")

    plot = sub.add_parser("plot", help="Plot a run directory")
    plot.add_argument("run_dir", help="Directory written by run")
    plot.add_argument("--out", default=None, help="SVG path (default <run_dir>/returns.svg)")
    return parser


def resolve_seeds(args: argparse.Namespace, default: Sequence[int]) -> List[int]:
    if getattr(args, "seed", None) is not None:
        return [args.seed]
    if getattr(args, "seeds", None) is not None:
        if args.seeds < 1:
            raise ConfigError(f"--seeds must be positive, got {args.seeds}")
        return list(range(args.seeds))
    return list(default)


def write_verification(
    reports: List[PropositionReport], out_dir: Path, output_format: str
) -> None:
    """One JSON report per check plus a summary table."""
    for report in reports:
        write_json(out_dir / f"{report.pid}.json", report.to_dict())

    if output_format == "json":
        write_json(
            out_dir / "summary.json",
            {"checks": [r.to_dict(include_trace=False) for r in reports]},
        )
        return
    lines = ["id,passed,expected_verdict,runs,max_gap,config_hash"]
    for r in reports:
        worst = max((x.max_gap for x in r.reports), default=0.0)
        lines.append(
            f"{r.pid},{str(r.passed).lower()},{r.expected_verdict.value},"
            f"{len(r.reports)},{worst!r},{r.config_hash}"
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n")


def cmd_verify(args: argparse.Namespace, lab: ConfigManager) -> int:
    if args.all:
        ids = list(PROPOSITIONS)
    elif args.ids:
        ids = list(args.ids)
    else:
        raise ConfigError("verify needs check ids or --all")

    settings = VerificationConfig.from_config_manager(lab)
    seeds = resolve_seeds(args, range(DEFAULT_SEED_COUNT))
    workers = args.workers or lab.get_workers()

    reports = [verify_proposition(pid, seeds, settings, workers) for pid in ids]
    out_dir = Path(args.out or lab.get_output_dir()) / "verify"
    write_verification(reports, out_dir, args.output_format)

    for report in reports:
        logger.info(report.summary())
    failed = [r.pid for r in reports if not r.passed]
    if failed:
        logger.error(f"Failed checks: {', '.join(failed)} (reports in {out_dir})")
        return EXIT_FAILURE
    logger.success(f"All {len(reports)} checks passed (reports in {out_dir})")
    return EXIT_OK


def _load_experiment(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_yaml(args.config)
    if args.seed is not None or args.seeds is not None:
        config = config.with_overrides(seeds=resolve_seeds(args, config.seeds))
    return config


def cmd_run(args: argparse.Namespace, lab: ConfigManager) -> int:
    config = _load_experiment(args)
    runner = ExperimentRunner(
        config,
        args.out or config.output_dir,
        args.workers or config.workers,
        args.output_format,
    )
    result = runner.run()
    if result.divergences:
        logger.warning(
            f"{len(result.divergences)} seed(s) diverged and stopped early; "
            f"see {result.run_dir / 'divergences.csv'}"
        )
    if lab.get_plots_enabled() and not args.no_plot and args.output_format == "csv":
        plot_run(result.run_dir)
    logger.success(f"Run complete: {result.run_dir} (config hash {result.config_hash})")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, lab: ConfigManager) -> int:
    config = _load_experiment(args)
    cells = run_sweep(config, args.out or config.output_dir, args.workers or config.workers)
    best: Dict[str, SweepCell] = {}
    for cell in cells:
        current = best.get(cell.algorithm)
        if current is None or cell.final_mean_return > current.final_mean_return:
            best[cell.algorithm] = cell
    for algorithm, cell in best.items():
        logger.info(
            f"{algorithm}: best final mean {cell.final_mean_return:.3f} at "
            f"lr={cell.learning_rate:g}, order={cell.fourier_order}"
        )
    return EXIT_OK


def cmd_replay(args: argparse.Namespace, lab: ConfigManager) -> int:
    result = replay_run(args.run_dir, args.workers)
    return EXIT_OK if result.identical else EXIT_FAILURE


def cmd_plot(args: argparse.Namespace, lab: ConfigManager) -> int:
    plot_run(args.run_dir, args.out)
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "replay": cmd_replay,
    "plot": cmd_plot,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    lab = ConfigManager(config_dir=args.lab_config)
    init_logger(
        level=args.log_level or lab.get_log_level(),
        log_dir=Path(lab.get_log_dir()),
        file_logging=lab.get_file_logging(),
    )

    try:
        return COMMANDS[args.command](args, lab)
    except (ConfigError, UnknownPropositionError) as e:
        logger.error(str(e))
        return EXIT_USAGE
    except CramerLabError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point, installed as ``irtcoresets``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any
from typing import Dict
from typing import Optional
from typing import Sequence

import pandas as pd

from irtcoresets.exceptions import ConfigError
from irtcoresets.exceptions import DegenerateLabelsError
from irtcoresets.exceptions import DegenerateScaleError
from irtcoresets.exceptions import InvalidArgumentError
from irtcoresets.exceptions import NumericalError
from irtcoresets.experiment import METHODS
from irtcoresets.experiment import ExperimentConfig
from irtcoresets.experiment import compare_methods
from irtcoresets.experiment import load_responses
from irtcoresets.experiment import read_summary
from irtcoresets.experiment import run_experiment
from irtcoresets.io import read_parameters
from irtcoresets.io import write_parameters
from irtcoresets.io import write_responses
from irtcoresets.mu import mu_summary
from irtcoresets.mu import mu_table
from irtcoresets.solver import alternate_fit
from irtcoresets.synth import GenConfig
from irtcoresets.synth import generate_synthetic

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

SUMMARY_COLUMNS = [
    "method", "repetition", "f_full", "f_core", "rel_err", "approx_ratio", "mad_alpha",
    "mad_theta", "core_seconds", "gain",
]


def _add_data_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--responses", help="response CSV (long or dense); simulated if omitted")
    parser.add_argument("--labels", choices=["pm1", "01"], help="label encoding of --responses")
    parser.add_argument("--n", type=int, help="number of simulated examinees")
    parser.add_argument("--m", type=int, help="number of simulated items")
    parser.add_argument("--model", choices=["1pl", "2pl", "3pl"])
    parser.add_argument("--seed", type=int)
    parser.add_argument("--iters", type=int, help="main iterations of the alternating fit")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--config", help="YAML experiment configuration (schema: 1)")


def _add_sampling_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, help="coreset size")
    parser.add_argument("--reps", type=int, help="repetitions")
    parser.add_argument("--sketched", action="store_true", default=None)
    parser.add_argument("--rounds", type=int, help="construction rounds (experimental above 1)")
    parser.add_argument("--direction", choices=["examinees", "items"])
    parser.add_argument("--sampling", choices=["alias", "reservoir"])
    parser.add_argument("--parallel-reps", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irtcoresets",
        description="Fit IRT models on full data or on weighted coresets.",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="simulate responses and true parameters")
    _add_data_arguments(gen)
    gen.add_argument("--layout", choices=["long", "dense"], default="long")

    fit = commands.add_parser("fit", help="fit the full data")
    _add_data_arguments(fit)

    coreset_fit = commands.add_parser("coreset-fit", help="repeated subsampled fits")
    _add_data_arguments(coreset_fit)
    _add_sampling_arguments(coreset_fit)
    coreset_fit.add_argument("--method", choices=METHODS)

    compare = commands.add_parser("compare", help="several subsampling methods, same seeds")
    _add_data_arguments(compare)
    _add_sampling_arguments(compare)
    compare.add_argument(
        "--methods", nargs="+", choices=METHODS[1:], default=["coreset", "uniform"]
    )

    mu = commands.add_parser("mu", help="per-item mu table at the fitted optimum")
    _add_data_arguments(mu)
    mu.add_argument("--params", help="directory with items.csv and abilities.csv to use")
    mu.add_argument("--mu-method", choices=["heuristic", "exact"])

    report = commands.add_parser("report", help="print the summary of an experiment directory")
    report.add_argument("directory")
    return parser


def _config(args: argparse.Namespace) -> ExperimentConfig:
    base = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides: Dict[str, Any] = {
        "responses": args.responses,
        "labels": args.labels,
        "n": args.n,
        "m": args.m,
        "model": args.model,
        "seed": args.seed,
        "iterations": args.iters,
        "out": args.out,
    }
    for flag, key in (
        ("k", "k"),
        ("reps", "repetitions"),
        ("sketched", "sketched"),
        ("rounds", "rounds"),
        ("direction", "direction"),
        ("sampling", "sampling"),
        ("parallel_reps", "parallel_reps"),
        ("method", "method"),
        ("mu_method", "mu_method"),
    ):
        overrides[key] = getattr(args, flag, None)
    return base.with_overrides(**overrides)


def _print_frame(frame: pd.DataFrame) -> None:
    print(frame.to_string(index=False))


def _gen(args: argparse.Namespace) -> None:
    config = _config(args)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    Y, items, abilities = generate_synthetic(
        GenConfig(n=config.n, m=config.m, model=config.model, seed=config.seed)
    )
    write_responses(Y, out / "responses.csv", layout=args.layout)
    write_parameters(items, abilities, out / "truth")


def _fit(args: argparse.Namespace) -> None:
    config = _config(args)
    Y = load_responses(config)
    items, abilities, trace = alternate_fit(Y, config.model, config.fit_config())
    out = Path(config.out)
    write_parameters(items, abilities, out)
    trace.to_frame().to_csv(out / "trace.csv", index=False)
    print(f"objective {trace.final_objective:.8f} after {trace.iterations} iterations")


def _coreset_fit(args: argparse.Namespace) -> None:
    result = run_experiment(_config(args))
    _print_frame(result.reports_frame()[SUMMARY_COLUMNS])
    print(f"best repetition {result.best.repetition}, gain {result.summary['gain']:.2f}%")


def _compare(args: argparse.Namespace) -> None:
    table = compare_methods(_config(args), args.methods)
    _print_frame(table[SUMMARY_COLUMNS])


def _mu(args: argparse.Namespace) -> None:
    config = _config(args)
    Y = load_responses(config)
    if args.params:
        items, abilities = read_parameters(args.params)
    else:
        items, abilities, _ = alternate_fit(Y, config.model, config.fit_config())
    table = mu_table(Y, items, abilities, config.mu_method)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "mu.csv", index=False)
    print(mu_summary(table).to_string())


def _report(args: argparse.Namespace) -> None:
    summary, reports = read_summary(args.directory)
    columns = [c for c in SUMMARY_COLUMNS if c in reports.columns]
    _print_frame(reports[columns])
    best = summary["best"]
    print(
        f"best of {summary['repetitions']} ({summary['method']}, {summary['model']}, "
        f"k = {summary['k']}): rel_err {best['rel_err']:.5f}, mad_alpha "
        f"{best['mad_alpha']:.5f}, mad_theta {best['mad_theta']:.5f}, gain {summary['gain']:.2f}%"
    )


COMMANDS = {
    "gen": _gen,
    "fit": _fit,
    "coreset-fit": _coreset_fit,
    "compare": _compare,
    "mu": _mu,
    "report": _report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        COMMANDS[args.command](args)
    except (ConfigError, InvalidArgumentError, FileNotFoundError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except (NumericalError, DegenerateScaleError, DegenerateLabelsError) as exc:
        logger.error("%s", exc)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

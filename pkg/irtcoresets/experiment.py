"""
Repeated full versus subsampled fits, with CSV/JSON artifacts

A run fits the full data once, then fits every repetition on subsamples redrawn from
the current estimates at each iteration, with seeds derived from the repetition. The
repetition with the smallest attained objective is reported as the best of the run.

Examples
--------
code ::
    from irtcoresets import ExperimentConfig, run_experiment

    config = ExperimentConfig(n=2000, m=20, k=200, repetitions=3, out="runs/demo")
    result = run_experiment(config)
    result.summary["best"]["rel_err"]
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from dataclasses import fields
from dataclasses import replace
from pathlib import Path
from time import perf_counter
from typing import Any
from typing import Dict
from typing import List
from typing import Mapping
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
import pandas as pd
import yaml

from irtcoresets.exceptions import ConfigError
from irtcoresets.exceptions import InvalidArgumentError
from irtcoresets.io import read_responses
from irtcoresets.metrics import FitReport
from irtcoresets.metrics import gain
from irtcoresets.metrics import item_pairs
from irtcoresets.metrics import metrics
from irtcoresets.metrics import theta_pairs
from irtcoresets.model import AbilityParameters
from irtcoresets.model import ItemParameters
from irtcoresets.model import ModelKind
from irtcoresets.model import ResponseMatrix
from irtcoresets.mu import mu_summary
from irtcoresets.mu import mu_table
from irtcoresets.samplers.coreset import CoresetOptions
from irtcoresets.samplers.scores import subsample
from irtcoresets.samplers.weighted import WeightedCoreset
from irtcoresets.solver import CoresetDirection
from irtcoresets.solver import CoresetSchedule
from irtcoresets.solver import FitConfig
from irtcoresets.solver import FitResult
from irtcoresets.solver import alternate_fit
from irtcoresets.synth import GenConfig
from irtcoresets.synth import generate_synthetic
from irtcoresets.utils import derive_seed
from irtcoresets.utils import irt_threads

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
METHODS = ("full", "coreset", "uniform", "distance", "l1lev", "lewis")


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of :func:`run_experiment`.

    Responses are read from ``responses`` when given and simulated with ``n``,
    ``m``, ``model`` and ``seed`` otherwise.
    """

    model: ModelKind = ModelKind.TWO_PL
    method: str = "coreset"
    k: int = 100
    repetitions: int = 5
    iterations: int = 50
    seed: int = 0
    n: int = 1000
    m: int = 20
    responses: Optional[str] = None
    labels: str = "pm1"
    out: str = "runs"
    sketched: bool = False
    rounds: int = 1
    direction: str = "examinees"
    mu_policy: str = "auto"
    sampling: str = "alias"
    centers: int = 25
    mu_table: bool = False
    mu_method: str = "heuristic"
    parallel_reps: bool = False
    schema: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "model", ModelKind.parse(self.model))
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc)) from exc
        if self.schema != SCHEMA_VERSION:
            raise ConfigError(
                f"unsupported config schema {self.schema!r}, expected {SCHEMA_VERSION}"
            )
        if self.method not in METHODS:
            raise ConfigError(
                f"unknown method {self.method!r}, expected one of {', '.join(METHODS)}"
            )
        for name in ("k", "repetitions", "iterations", "n", "m", "rounds", "centers"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.labels not in ("pm1", "01"):
            raise ConfigError(f"labels must be pm1 or 01, got {self.labels!r}")
        if self.responses is not None and not Path(self.responses).is_file():
            raise ConfigError(f"response file not found: {self.responses}")
        try:
            self.coreset_options()
        except (InvalidArgumentError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if values.get("schema") != SCHEMA_VERSION:
            raise ConfigError(f"config must declare schema: {SCHEMA_VERSION}")
        return cls(**values)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> ExperimentConfig:
        """Load a YAML (or JSON) configuration."""
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        with open(path) as f:
            try:
                values = yaml.safe_load(f)
            except yaml.YAMLError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: expected a mapping at the top level")
        return cls.from_dict(values)

    def with_overrides(self, **overrides: Any) -> ExperimentConfig:
        """Copy with every override that is not None applied."""
        applied = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **applied)

    def coreset_options(self) -> CoresetOptions:
        return CoresetOptions(
            sketched=self.sketched,
            rounds=self.rounds,
            mu_policy=self.mu_policy,
            method=self.sampling,
            direction=self.direction,
        )

    def fit_config(self) -> FitConfig:
        return FitConfig(max_main_iterations=self.iterations, seed=self.seed)

    def to_dict(self) -> Dict[str, Any]:
        values = asdict(self)
        values["model"] = self.model.value
        return values


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    reports: List[FitReport]
    full_fit: FitResult
    best_fit: FitResult
    best_coreset: Optional[WeightedCoreset]
    summary: Dict[str, Any] = field(default_factory=dict)
    mu: Optional[pd.DataFrame] = None

    @property
    def best(self) -> FitReport:
        return min(self.reports, key=lambda report: report.f_core)

    def reports_frame(self) -> pd.DataFrame:
        return pd.DataFrame([report.to_dict() for report in self.reports])


def load_responses(config: ExperimentConfig) -> ResponseMatrix:
    if config.responses is not None:
        return read_responses(config.responses, labels=config.labels)
    Y, _, _ = generate_synthetic(
        GenConfig(n=config.n, m=config.m, model=config.model, seed=config.seed)
    )
    return Y


def fit_full(Y: ResponseMatrix, config: ExperimentConfig) -> Tuple[FitResult, float]:
    tick = perf_counter()
    fit = alternate_fit(Y, config.model, config.fit_config())
    return fit, perf_counter() - tick


def _repetition(
    Y: ResponseMatrix,
    config: ExperimentConfig,
    repetition: int,
    full_fit: FitResult,
    full_seconds: float,
) -> Tuple[FitReport, FitResult, Optional[WeightedCoreset]]:
    seed = derive_seed(config.seed, repetition)
    tick = perf_counter()
    data = Y if config.method == "full" else _schedule(Y, config, seed)
    fit = alternate_fit(data, config.model, config.fit_config())
    core_seconds = perf_counter() - tick

    report = replace(
        metrics(full_fit, fit, Y),
        full_seconds=full_seconds,
        core_seconds=core_seconds,
        sampling_seconds=float(sum(fit.trace.sampling_seconds)),
        step_2a_seconds=float(sum(fit.trace.step_2a_seconds)),
        step_2b_seconds=float(sum(fit.trace.step_2b_seconds)),
        gain=gain(core_seconds, full_seconds),
        method=config.method,
        model=config.model.value,
        k=config.k if config.method != "full" else Y.n,
        seed=seed,
        repetition=repetition,
    )
    logger.info(
        "repetition %d/%d (%s): f_core %.6f, rel_err %.5f, %.2fs",
        repetition + 1, config.repetitions, config.method, report.f_core, report.rel_err,
        core_seconds,
    )
    return report, fit, fit.trace.coreset


def _schedule(Y: ResponseMatrix, config: ExperimentConfig, seed: int) -> CoresetSchedule:
    """Subsample by ``config.method`` at every iteration, each draw with its own seed."""
    options = config.coreset_options()

    def draw(
        items: ItemParameters, abilities: AbilityParameters, iteration: int
    ) -> WeightedCoreset:
        return subsample(
            config.method, Y, items, abilities, config.model, config.k,
            derive_seed(seed, iteration), options, config.centers,
        )

    return CoresetSchedule(Y, draw, CoresetDirection(config.direction))


def run_experiment(
    config: ExperimentConfig,
    Y: Optional[ResponseMatrix] = None,
    full: Optional[Tuple[FitResult, float]] = None,
    write: bool = True,
) -> ExperimentResult:
    """Fit the full data and ``config.repetitions`` subsamples of it.

    Parameters
    ----------
    config : ExperimentConfig
    Y : ResponseMatrix, optional
        Responses to use instead of loading them from ``config``.
    full : (FitResult, float), optional
        A full fit and its wall-clock seconds to reuse.
    write : bool
        Write the artifacts into ``config.out``.

    Returns
    -------
    ExperimentResult
    """
    Y = load_responses(config) if Y is None else Y
    population = Y.n if config.direction == "examinees" else Y.m
    if config.method != "full" and config.k >= population:
        raise ConfigError(
            f"k = {config.k} must be smaller than the {population} {config.direction}"
        )

    logger.info(
        "experiment: %s %s on %d x %d, k = %d, %d repetitions",
        config.model.value, config.method, Y.m, Y.n, config.k, config.repetitions,
    )
    full_fit, full_seconds = fit_full(Y, config) if full is None else full

    repetitions = range(config.repetitions)
    workers = irt_threads() if config.parallel_reps else 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(
                pool.map(lambda r: _repetition(Y, config, r, full_fit, full_seconds), repetitions)
            )
    else:
        outcomes = [_repetition(Y, config, r, full_fit, full_seconds) for r in repetitions]

    reports = [outcome[0] for outcome in outcomes]
    best_index = int(np.argmin([report.f_core for report in reports]))
    _, best_fit, best_coreset = outcomes[best_index]

    result = ExperimentResult(
        config=config,
        reports=reports,
        full_fit=full_fit,
        best_fit=best_fit,
        best_coreset=best_coreset,
    )
    if config.mu_table:
        result.mu = mu_table(Y, full_fit.items, full_fit.abilities, config.mu_method)
    result.summary = summarize(result)
    if write:
        write_artifacts(result, Path(config.out))
    return result


def summarize(result: ExperimentResult) -> Dict[str, Any]:
    """Best-of-R report, mean timings and gain, and the mu summary when computed."""
    core_seconds = [report.core_seconds for report in result.reports]
    best = result.best
    summary: Dict[str, Any] = {
        "schema": SCHEMA_VERSION,
        "method": result.config.method,
        "model": result.config.model.value,
        "k": best.k,
        "repetitions": len(result.reports),
        "best_repetition": best.repetition,
        "best": best.to_dict(),
        "full_seconds": best.full_seconds,
        "mean_core_seconds": float(np.mean(core_seconds)),
        "gain": gain(float(np.mean(core_seconds)), best.full_seconds),
    }
    if result.mu is not None:
        summary["mu"] = mu_summary(result.mu).to_dict()
    return summary


def write_artifacts(result: ExperimentResult, out: Path) -> List[Path]:
    """Write reports, summary, parameter pairs, trace and coreset of the best repetition."""
    out.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    def emit(frame: pd.DataFrame, name: str) -> None:
        path = out / name
        frame.to_csv(path, index=False)
        written.append(path)

    emit(result.reports_frame(), "reports.csv")
    emit(item_pairs(result.full_fit, result.best_fit), "item_pairs.csv")
    emit(theta_pairs(result.full_fit, result.best_fit), "theta_pairs.csv")
    emit(result.best_fit.trace.to_frame(), "trace.csv")
    if result.best_coreset is not None:
        emit(result.best_coreset.to_frame(), "coreset.csv")
    if result.mu is not None:
        emit(result.mu, "mu.csv")

    summary_path = out / "summary.json"
    with open(summary_path, "w") as f:
        json.dump(result.summary, f, indent=2)
    config_path = out / "config.yaml"
    with open(config_path, "w") as f:
        yaml.safe_dump(result.config.to_dict(), f, sort_keys=False)
    written.extend([summary_path, config_path])

    for path in written:
        logger.info("wrote %s", path)
    return written


def compare_methods(
    config: ExperimentConfig, methods: Sequence[str] = ("coreset", "uniform")
) -> pd.DataFrame:
    """Run several methods on the same data, full fit and seeds.

    Each method writes into its own subdirectory of ``config.out``. Returns one row
    of best-of-R metrics per method.
    """
    Y = load_responses(config)
    full = fit_full(Y, config)
    rows = []
    for method in methods:
        method_config = replace(config, method=method, out=str(Path(config.out) / method))
        result = run_experiment(method_config, Y=Y, full=full)
        rows.append({**result.best.to_dict(), "gain": result.summary["gain"]})
    return pd.DataFrame(rows)


def read_summary(out: Union[str, Path]) -> Tuple[Dict[str, Any], pd.DataFrame]:
    """Load ``summary.json`` and ``reports.csv`` from an experiment directory."""
    out = Path(out)
    try:
        with open(out / "summary.json") as f:
            summary = json.load(f)
        reports = pd.read_csv(out / "reports.csv", float_precision="round_trip")
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"{out} holds no experiment results: {exc.filename}") from exc
    return summary, reports

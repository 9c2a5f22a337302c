from __future__ import annotations

from dataclasses import asdict
from dataclasses import dataclass
from typing import Any
from typing import Dict
from typing import Tuple

import numpy as np
import pandas as pd

from irtcoresets.exceptions import DimensionMismatchError
from irtcoresets.exceptions import InvalidArgumentError
from irtcoresets.exceptions import NotStandardizedError
from irtcoresets.model import ResponseMatrix
from irtcoresets.model import full_nll
from irtcoresets.solver import FitResult


@dataclass(frozen=True)
class FitReport:
    """Comparison of a subsampled fit against the full fit.

    Parameters
    ----------
    f_full : float
        Objective attained by the full run.
    f_core : float
        Final traced objective of the subsampled run: the weighted objective for a
        fixed coreset, the full objective when the coreset is redrawn every iteration.
    f_full_at_core : float
        Full-data objective at the subsampled run's estimates.
    rel_err : float
        ``|f_core - f_full| / f_full``.
    approx_ratio : float
        ``f_full_at_core / f_full``.
    mad_alpha : float
        Mean over items of ``|a - a'| + |b - b'| + |c - c'|``.
    mad_theta : float
        Mean over examinees of ``|theta - theta'|``.
    full_seconds, core_seconds, sampling_seconds : float
        Wall-clock of the full fit, of the subsampled fit including sampling, and of
        the sampling alone.
    step_2a_seconds, step_2b_seconds : float
        Time the subsampled fit spent re-estimating abilities and items.
    gain : float
        ``(1 - core_seconds / full_seconds) * 100``.
    """

    f_full: float
    f_core: float
    f_full_at_core: float
    rel_err: float
    approx_ratio: float
    mad_alpha: float
    mad_theta: float
    full_seconds: float = 0.0
    core_seconds: float = 0.0
    sampling_seconds: float = 0.0
    step_2a_seconds: float = 0.0
    step_2b_seconds: float = 0.0
    gain: float = float("nan")
    method: str = "coreset"
    model: str = "2pl"
    k: int = 0
    seed: int = 0
    repetition: int = 0

    def __post_init__(self) -> None:
        if self.rel_err < 0:
            raise InvalidArgumentError(f"relative error must be nonnegative, got {self.rel_err}")
        timings = (
            self.full_seconds,
            self.core_seconds,
            self.sampling_seconds,
            self.step_2a_seconds,
            self.step_2b_seconds,
        )
        if min(timings) < 0:
            raise InvalidArgumentError("timings must be nonnegative")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def gain(mean_core: float, mean_full: float) -> float:
    """Relative time saved, in percent.

    >>> gain(50.0, 200.0)
    75.0
    """
    if mean_full <= 0:
        raise InvalidArgumentError(f"full running time must be positive, got {mean_full}")
    return (1.0 - mean_core / mean_full) * 100.0


def _check_fits(full_fit: FitResult, core_fit: FitResult, Y: ResponseMatrix) -> None:
    for name, fit in (("full", full_fit), ("subsampled", core_fit)):
        if not fit.trace.standardized:
            raise NotStandardizedError(f"the {name} fit was not standardized")
        if fit.items.m != Y.m or fit.abilities.n != Y.n:
            raise DimensionMismatchError(
                f"the {name} fit has {fit.items.m} items and {fit.abilities.n} abilities, "
                f"responses are {Y.m} x {Y.n}"
            )


def parameter_deviation(full_fit: FitResult, core_fit: FitResult) -> Tuple[float, float]:
    """``mad(alpha)`` and ``mad(theta)``, each sum divided by its own count."""
    full_items, core_items = full_fit.items, core_fit.items
    item_gap = (
        np.abs(full_items.a - core_items.a)
        + np.abs(full_items.b - core_items.b)
        + np.abs(full_items.c - core_items.c)
    )
    theta_gap = np.abs(full_fit.abilities.theta - core_fit.abilities.theta)
    return float(item_gap.mean()), float(theta_gap.mean())


def metrics(full_fit: FitResult, core_fit: FitResult, Y: ResponseMatrix) -> FitReport:
    """Objective and parameter metrics of a subsampled fit.

    Both fits must be standardized so that their scales agree. Timing fields are left
    at their defaults.
    """
    _check_fits(full_fit, core_fit, Y)
    f_full = full_fit.trace.final_objective
    f_core = core_fit.trace.final_objective
    f_full_at_core = full_nll(Y, core_fit.items, core_fit.abilities)
    mad_alpha, mad_theta = parameter_deviation(full_fit, core_fit)
    return FitReport(
        f_full=f_full,
        f_core=f_core,
        f_full_at_core=f_full_at_core,
        rel_err=abs(f_core - f_full) / f_full,
        approx_ratio=f_full_at_core / f_full,
        mad_alpha=mad_alpha,
        mad_theta=mad_theta,
    )


def item_pairs(full_fit: FitResult, core_fit: FitResult) -> pd.DataFrame:
    """Item parameters of both fits side by side, one row per item."""
    full_items, core_items = full_fit.items, core_fit.items
    return pd.DataFrame(
        {
            "item": np.arange(full_items.m),
            "a_full": full_items.a,
            "a_core": core_items.a,
            "b_full": full_items.b,
            "b_core": core_items.b,
            "c_full": full_items.c,
            "c_core": core_items.c,
        }
    )


def theta_pairs(full_fit: FitResult, core_fit: FitResult) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "examinee": np.arange(full_fit.abilities.n),
            "theta_full": full_fit.abilities.theta,
            "theta_core": core_fit.abilities.theta,
        }
    )

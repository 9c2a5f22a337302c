"""
Score-based baselines and the subsample dispatcher

Every sampler here hands its scores to
:func:`irtcoresets.samplers.weighted.sample_weighted`, so all of them return the
same :class:`WeightedCoreset`.
"""
from __future__ import annotations

import logging
from enum import Enum
from typing import Optional
from typing import Union

import numpy as np

from irtcoresets.exceptions import InvalidArgumentError
from irtcoresets.leverage import leverage_l1
from irtcoresets.leverage import lewis_weights_l1
from irtcoresets.model import AbilityParameters
from irtcoresets.model import ItemParameters
from irtcoresets.model import ModelKind
from irtcoresets.model import ResponseMatrix
from irtcoresets.samplers.coreset import CoresetOptions
from irtcoresets.samplers.coreset import build_coreset
from irtcoresets.samplers.distance import DEFAULT_CENTERS
from irtcoresets.samplers.distance import distance_sampling_coreset
from irtcoresets.samplers.uniform import uniform_coreset
from irtcoresets.samplers.weighted import WeightedCoreset
from irtcoresets.samplers.weighted import sample_weighted
from irtcoresets.solver import CoresetDirection

logger = logging.getLogger(__name__)


class BaselineKind(str, Enum):
    UNIFORM = "uniform"
    DISTANCE_SAMPLING = "distance"
    L1_LEVERAGE = "l1lev"
    LEWIS_L1 = "lewis"


def score_based_coreset(
    kind: Union[BaselineKind, str], X: np.ndarray, k: int, seed: int = 0
) -> WeightedCoreset:
    """Sample by ℓ1 leverage scores or ℓ1 Lewis weights, plus a ``1/n`` floor.

    Examples
    --------
    >>> coreset = score_based_coreset("l1lev", np.eye(2), k=2, seed=0)
    >>> coreset.u.round(12).tolist()
    [1.0, 1.0]
    """
    kind = BaselineKind(kind)
    X = np.asarray(X, dtype=np.float64)
    if kind is BaselineKind.L1_LEVERAGE:
        values = leverage_l1(X).values
    elif kind is BaselineKind.LEWIS_L1:
        values = lewis_weights_l1(X).values
    else:
        raise InvalidArgumentError(f"{kind.value} is not a score-based baseline")
    return sample_weighted(values + 1.0 / X.shape[0], k, seed)


def subsample(
    method: str,
    Y: ResponseMatrix,
    items: ItemParameters,
    abilities: AbilityParameters,
    model: Union[ModelKind, str],
    k: int,
    seed: int = 0,
    options: Optional[CoresetOptions] = None,
    centers: int = DEFAULT_CENTERS,
) -> WeightedCoreset:
    """Draw a coreset with ``method``: ``coreset`` or one of the baseline kinds.

    Baselines score the rows ``(theta_j, -1)`` when compressing examinees and
    ``(a_i, b_i)`` when compressing items.
    """
    options = CoresetOptions() if options is None else options
    if method == "coreset":
        return build_coreset(Y, items, abilities, model, k, options, seed)

    try:
        kind = BaselineKind(method)
    except ValueError as exc:
        raise InvalidArgumentError(
            f"unknown subsampling method {method!r}, expected coreset, uniform, distance, "
            "l1lev or lewis"
        ) from exc

    examinees = options.direction is CoresetDirection.EXAMINEES
    rows = abilities.beta if examinees else items.alpha
    logger.debug("%s baseline over %d rows, k = %d", kind.value, rows.shape[0], k)
    if kind is BaselineKind.UNIFORM:
        return uniform_coreset(rows.shape[0], k, seed)
    if kind is BaselineKind.DISTANCE_SAMPLING:
        return distance_sampling_coreset(rows, k, min(centers, rows.shape[0]), seed)
    return score_based_coreset(kind, rows, k, seed)

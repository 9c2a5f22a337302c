"""
mu-complexity and the minimum ℓ1 singular value of two-column matrices

``mu_p(X) = sup_eta ||(X eta)^+||_p / ||(X eta)^-||_p`` for ``p`` in {0, 1}, where
the positive part collects the entries ``>= 0``. Since ``eta`` and ``-eta`` both
enter the supremum, ``mu_p >= 1``.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterable
from typing import List
from typing import Optional
from typing import Sequence
from typing import Union

import numpy as np
import pandas as pd

from irtcoresets.angular import TWO_PI
from irtcoresets.angular import AngularIndex
from irtcoresets.angular import directions
from irtcoresets.angular import is_rank_two
from irtcoresets.exceptions import InvalidArgumentError
from irtcoresets.exceptions import UndefinedComplexityError
from irtcoresets.model import AbilityParameters
from irtcoresets.model import ItemParameters
from irtcoresets.model import LossKind
from irtcoresets.model import ResponseMatrix
from irtcoresets.model import SignedDesign
from irtcoresets.solver import fit_conditional
from irtcoresets.utils import irt_threads

logger = logging.getLogger(__name__)

HEURISTIC_DIRECTIONS = 64
EXACT_SIZE_LIMIT = 5000


class MuMethod(str, Enum):
    EXACT_SWEEP = "exact"
    HEURISTIC = "heuristic"


@dataclass(frozen=True)
class MuEstimate:
    """Estimates of ``mu_0`` and ``mu_1``; infinite for separable inputs.

    ``witnesses`` holds, as rows, a direction attaining ``mu_0`` and one attaining
    ``mu_1`` (or approaching it when the value is infinite).
    """

    mu0: float
    mu1: float
    method: MuMethod
    witnesses: np.ndarray

    @property
    def mu(self) -> float:
        return max(self.mu0, self.mu1)

    @property
    def is_finite(self) -> bool:
        return bool(np.isfinite(self.mu))


def _as_matrix(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != 2:
        raise InvalidArgumentError(f"expected an n x 2 matrix, got shape {X.shape}")
    if X.shape[0] < 2:
        raise InvalidArgumentError("mu-complexity needs at least two rows")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("matrix entries must be finite")
    return X


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)


def mu_exact_2d(X: np.ndarray) -> MuEstimate:
    """Exact ``mu_0`` and ``mu_1`` by a sweep over the sectors between row normals.

    Inside a sector the sign pattern of ``X eta`` is fixed, so ``mu_0`` is constant
    and ``mu_1`` is a ratio of two linear forms in ``eta``, monotone in the angle.
    ``mu_0`` is read at sector midpoints and ``mu_1`` at the sector ends.

    Examples
    --------
    >>> estimate = mu_exact_2d(np.array([[1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]]))
    >>> round(estimate.mu0, 12), round(estimate.mu1, 12)
    (2.0, 2.0)
    """
    X = _as_matrix(X)
    index = AngularIndex.build(X)
    if index.size == 0:
        raise UndefinedComplexityError("mu-complexity of an all-zero matrix is undefined")
    zero_rows = X.shape[0] - index.size

    starts = index.breakpoints()
    ends = np.append(starts[1:], starts[0] + TWO_PI)
    mids = 0.5 * (starts + ends)

    count, positive = index.positive_side(mids)
    negative = index.total - positive
    negative_count = index.size - count

    mu0_sectors = _ratio((count + zero_rows).astype(np.float64), negative_count.astype(np.float64))
    k0 = int(np.argmax(mu0_sectors))

    scale = np.linalg.norm(positive, axis=1) + np.linalg.norm(negative, axis=1)
    tiny = 1e-12 * scale
    eta_mid = directions(mids)
    mid_value = _ratio(
        np.sum(positive * eta_mid, axis=1), -np.sum(negative * eta_mid, axis=1)
    )

    sector_mu1 = mid_value.copy()
    sector_witness = eta_mid.copy()
    for boundary in (starts, ends):
        eta = directions(boundary)
        num = np.maximum(np.sum(positive * eta, axis=1), 0.0)
        den = np.maximum(-np.sum(negative * eta, axis=1), 0.0)
        value = np.where(
            den > tiny,
            num / np.where(den > tiny, den, 1.0),
            np.where(num > tiny, np.inf, mid_value),
        )
        larger = value > sector_mu1
        sector_mu1 = np.where(larger, value, sector_mu1)
        sector_witness = np.where(larger[:, None], eta, sector_witness)
    # no negative rows at all in the sector
    sector_mu1 = np.where(negative_count == 0, np.inf, sector_mu1)
    k1 = int(np.argmax(sector_mu1))

    return MuEstimate(
        mu0=float(mu0_sectors[k0]),
        mu1=float(sector_mu1[k1]),
        method=MuMethod.EXACT_SWEEP,
        witnesses=np.vstack([eta_mid[k0], sector_witness[k1]]),
    )


def _direction_ratios(X: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """``mu_0`` and ``mu_1`` ratios at each direction; NaN where ``mu_0`` is not generic."""
    z = eta @ X.T
    nonzero = np.any(X != 0, axis=1)
    boundary = np.any((z == 0) & nonzero[None, :], axis=1)

    pos_count = np.sum(z >= 0, axis=1).astype(np.float64)
    neg_count = np.sum(z < 0, axis=1).astype(np.float64)
    mu0 = np.where(boundary, np.nan, _ratio(pos_count, neg_count))

    num = np.sum(np.where(z > 0, z, 0.0), axis=1)
    den = -np.sum(np.where(z < 0, z, 0.0), axis=1)
    mu1 = np.where((den == 0) & (num == 0), np.nan, _ratio(num, den))
    return np.column_stack([mu0, mu1])


def _default_optimum(X: np.ndarray) -> np.ndarray:
    design = SignedDesign(rows=X, labels=np.full(X.shape[0], int(LossKind.FAIL)))
    return fit_conditional(design, "2pl").params


def mu_heuristic(
    X: np.ndarray,
    extra_directions: Optional[Sequence[Sequence[float]]] = None,
    optimum: Optional[Sequence[float]] = None,
) -> MuEstimate:
    """Lower bound on mu from a finite set of directions.

    Evaluates the ratios at the logistic optimum ``eta*`` of ``X`` (``sum softplus(X eta)``
    over the default item box unless ``optimum`` is given), at ``-eta*``, at 64 evenly
    spaced directions and at ``extra_directions``. Directions exactly orthogonal to a
    nonzero row are skipped for ``mu_0``.
    """
    X = _as_matrix(X)
    if not np.any(X != 0):
        raise UndefinedComplexityError("mu-complexity of an all-zero matrix is undefined")

    eta_star = _default_optimum(X) if optimum is None else np.asarray(optimum, dtype=np.float64)
    candidates: List[np.ndarray] = [
        eta_star[None, :2],
        -eta_star[None, :2],
        directions(np.arange(HEURISTIC_DIRECTIONS) * (TWO_PI / HEURISTIC_DIRECTIONS)),
    ]
    if extra_directions is not None and len(extra_directions):
        candidates.append(np.asarray(extra_directions, dtype=np.float64).reshape(-1, 2))
    eta = np.vstack(candidates)
    eta = eta[np.any(eta != 0, axis=1)]

    ratios = _direction_ratios(X, eta)
    mu = [1.0, 1.0]
    witnesses = np.zeros((2, 2))
    for column in range(2):
        values = ratios[:, column]
        if np.any(~np.isnan(values)):
            best = int(np.nanargmax(values))
            if values[best] >= mu[column]:
                mu[column] = float(values[best])
                witnesses[column] = eta[best]
    return MuEstimate(mu0=mu[0], mu1=mu[1], method=MuMethod.HEURISTIC, witnesses=witnesses)


def sigma1_min_2d(X: np.ndarray) -> float:
    """Exact ``inf_x ||X x||_1 / ||x||_1``.

    ``||X x||_1`` is linear along each edge of the ℓ1 diamond between the points where
    a row changes sign, so only the diamond's vertices and those points are checked.

    Examples
    --------
    >>> sigma1_min_2d(np.diag([2.0, 3.0]))
    2.0
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != 2 or X.shape[0] < 1:
        raise InvalidArgumentError(f"expected a non-empty n x 2 matrix, got shape {X.shape}")
    index = AngularIndex.build(X)
    if index.size == 0:
        return 0.0
    if not is_rank_two(X):
        return 0.0

    angles = np.concatenate([[0.0, 0.5 * np.pi], index.breakpoints()])
    eta = directions(angles)
    ratio = index.l1_norms(angles) / np.sum(np.abs(eta), axis=1)
    # exact recomputation at the minimizing candidate
    best = eta[int(np.argmin(ratio))]
    return float(np.sum(np.abs(X @ best)) / np.sum(np.abs(best)))


def mu_estimate(
    X: np.ndarray,
    method: Union[MuMethod, str] = MuMethod.HEURISTIC,
    optimum: Optional[Sequence[float]] = None,
) -> MuEstimate:
    if MuMethod(method) is MuMethod.EXACT_SWEEP:
        return mu_exact_2d(X)
    return mu_heuristic(X, optimum=optimum)


def item_design_rows(Y: ResponseMatrix, abilities: AbilityParameters, item: int) -> np.ndarray:
    """Rows ``-Y_ij (theta_j, -1)`` of item ``item``."""
    return -Y.entries[item][:, None].astype(np.float64) * abilities.beta


def mu_table(
    Y: ResponseMatrix,
    items: ItemParameters,
    abilities: AbilityParameters,
    method: Union[MuMethod, str] = MuMethod.HEURISTIC,
    threads: Optional[int] = None,
) -> pd.DataFrame:
    """Per-item mu of the item designs, the supremum taken over item parameters.

    The heuristic is anchored at each item's fitted ``(a_i, b_i)``.

    Returns
    -------
    DataFrame
        Columns ``item, mu0, mu1, method, degenerate``.
    """
    method = MuMethod(method)

    def one(item: int) -> MuEstimate:
        X = item_design_rows(Y, abilities, item)
        if method is MuMethod.EXACT_SWEEP:
            return mu_exact_2d(X)
        return mu_heuristic(X, optimum=[items.a[item], items.b[item]])

    workers = irt_threads(threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            estimates = list(pool.map(one, range(Y.m)))
    else:
        estimates = [one(i) for i in range(Y.m)]

    table = pd.DataFrame(
        {
            "item": np.arange(Y.m),
            "mu0": [e.mu0 for e in estimates],
            "mu1": [e.mu1 for e in estimates],
            "method": method.value,
        }
    )
    table["degenerate"] = ~np.isfinite(table["mu0"]) | ~np.isfinite(table["mu1"])
    flagged = int(table["degenerate"].sum())
    if flagged:
        logger.warning("%d of %d items have unbounded mu (separable labels)", flagged, Y.m)
    return table


def mu_summary(table: pd.DataFrame, columns: Iterable[str] = ("mu0", "mu1")) -> pd.DataFrame:
    """Mean, median and maximum over the finite entries, plus the count of infinite ones."""
    summary = {}
    for column in columns:
        values = table[column].to_numpy(dtype=np.float64)
        finite = values[np.isfinite(values)]
        summary[column] = {
            "mean": float(finite.mean()) if finite.size else np.nan,
            "median": float(np.median(finite)) if finite.size else np.nan,
            "max": float(finite.max()) if finite.size else np.nan,
            "infinite": float(values.size - finite.size),
        }
    return pd.DataFrame(summary)

"""
Leverage scores and Lewis weights of tall two-column matrices

Examples
--------
code ::
    import numpy as np
    from irtcoresets import leverage_l2, leverage_l1

    X = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    leverage_l2(X).values   # [0.5, 0.5, 1.0]
    leverage_l1(X).values   # [0.5, 0.5, 1.0]
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg
import scipy.sparse

from irtcoresets.angular import is_rank_two
from irtcoresets.angular import polygon_gauge
from irtcoresets.angular import zonotope_vertices
from irtcoresets.exceptions import InvalidArgumentError
from irtcoresets.utils import make_rng

logger = logging.getLogger(__name__)

SKETCH_RETRIES = 3
_SKETCH_STREAM = 0xC5


class ScoreKind(str, Enum):
    L2_LEVERAGE = "l2"
    L2_LEVERAGE_SKETCHED = "l2_sketched"
    L1_LEVERAGE = "l1"
    LEWIS_L1 = "lewis"


@dataclass(frozen=True)
class ScoreVector:
    """Nonnegative per-row scores.

    ``converged`` is False only for a Lewis iteration that ran out of iterations.
    """

    values: np.ndarray
    kind: ScoreKind
    converged: bool = True
    iterations: int = 0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if np.any(values < 0):
            raise InvalidArgumentError("scores must be nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def total(self) -> float:
        return float(self.values.sum())


def _as_design(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != 2 or X.shape[0] < 1:
        raise InvalidArgumentError(f"expected a non-empty n x 2 matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("matrix entries must be finite")
    return X


def _numerical_rank(R: np.ndarray, rows: int) -> int:
    diagonal = np.abs(np.diag(R))
    if diagonal.size == 0 or diagonal[0] == 0:
        return 0
    tol = max(rows, R.shape[1]) * np.finfo(np.float64).eps * diagonal[0]
    return int(np.sum(diagonal > tol))


def leverage_l2(X: np.ndarray) -> ScoreVector:
    """Squared row norms of an orthonormal basis of the column space.

    The basis comes from a Householder QR with column pivoting and is truncated to
    the numerical rank, so rank-one inputs are handled and a zero matrix scores 0.

    Examples
    --------
    >>> leverage_l2(np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])).values.round(12).tolist()
    [0.5, 0.5, 1.0]
    """
    X = _as_design(X)
    Q, R, _ = scipy.linalg.qr(X, mode="economic", pivoting=True)
    rank = _numerical_rank(R, X.shape[0])
    values = np.sum(Q[:, :rank] ** 2, axis=1)
    return ScoreVector(values=values, kind=ScoreKind.L2_LEVERAGE)


def count_sketch(rows: int, n: int, rng: np.random.Generator) -> scipy.sparse.csr_matrix:
    """Sparse ``rows x n`` embedding with one random sign per column in a random row."""
    targets = rng.integers(0, rows, size=n)
    signs = rng.choice(np.array([-1.0, 1.0]), size=n)
    return scipy.sparse.coo_matrix((signs, (targets, np.arange(n))), shape=(rows, n)).tocsr()


def leverage_l2_sketched(X: np.ndarray, sketch_rows: int = 64, seed: int = 0) -> ScoreVector:
    """Leverage scores through the R factor of a CountSketch of ``X``.

    Returns squared row norms of ``X R^-1``. A rank-deficient sketch is redrawn up to
    three times before falling back to :func:`leverage_l2`.
    """
    X = _as_design(X)
    if sketch_rows < 16:
        raise InvalidArgumentError(f"sketch_rows must be at least 16, got {sketch_rows}")

    for attempt in range(SKETCH_RETRIES + 1):
        rng = make_rng(seed, _SKETCH_STREAM, attempt)
        sketched = count_sketch(sketch_rows, X.shape[0], rng) @ X
        R = scipy.linalg.qr(sketched, mode="r")[0][:2]
        if _numerical_rank(R, sketch_rows) == 2:
            basis = scipy.linalg.solve_triangular(R, X.T, trans="T").T
            values = np.sum(basis**2, axis=1)
            return ScoreVector(values=values, kind=ScoreKind.L2_LEVERAGE_SKETCHED)
        logger.debug(
            "sketch %d of %d is rank deficient, redrawing", attempt + 1, SKETCH_RETRIES + 1
        )

    logger.warning("CountSketch stayed rank deficient, using exact QR leverage")
    return leverage_l2(X)


def leverage_l1(X: np.ndarray) -> ScoreVector:
    """Exact ``sup_eta |x_i eta| / ||X eta||_1`` for every row.

    The supremum is the gauge of ``x_i`` with respect to the zonotope
    ``{X^T v : ||v||_inf <= 1}``, evaluated by one angular sort and a binary search
    per row. Rank-one inputs reduce to ``||x_i|| / sum_j ||x_j||``; zero rows score 0.

    Examples
    --------
    >>> leverage_l1(np.eye(2)).values.tolist()
    [1.0, 1.0]
    """
    X = _as_design(X)
    if not is_rank_two(X):
        norms = np.linalg.norm(X, axis=1)
        total = norms.sum()
        values = norms / total if total > 0 else np.zeros(X.shape[0])
        return ScoreVector(values=values, kind=ScoreKind.L1_LEVERAGE)

    values = polygon_gauge(zonotope_vertices(X), X)
    return ScoreVector(values=np.clip(values, 0.0, 1.0), kind=ScoreKind.L1_LEVERAGE)


def lewis_weights_l1(X: np.ndarray, max_iters: int = 100, tol: float = 1e-10) -> ScoreVector:
    """ℓ1 Lewis weights by the fixed point ``w_i = sqrt(x_i (X^T W^-1 X)^-1 x_i^T)``.

    Starts from ℓ2 leverage scores. Zero rows keep weight 0. When ``max_iters`` runs
    out the last iterate is returned with ``converged=False``.

    Examples
    --------
    >>> lewis_weights_l1(np.eye(2)).values.tolist()
    [1.0, 1.0]
    """
    X = _as_design(X)
    if not is_rank_two(X):
        raise InvalidArgumentError("Lewis weights need a matrix of rank two")

    active = np.any(X != 0, axis=1)
    rows = X[active]
    weights = leverage_l2(rows).values.copy()

    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        gram = (rows / weights[:, None]).T @ rows
        inverse = np.linalg.inv(gram)
        updated = np.sqrt(np.einsum("ij,jk,ik->i", rows, inverse, rows))
        change = np.max(np.abs(updated - weights) / updated)
        weights = updated
        if change <= tol:
            converged = True
            break

    if not converged:
        logger.warning("Lewis weights did not converge in %d iterations", max_iters)
    values = np.zeros(X.shape[0])
    values[active] = weights
    return ScoreVector(
        values=values, kind=ScoreKind.LEWIS_L1, converged=converged, iterations=iterations
    )

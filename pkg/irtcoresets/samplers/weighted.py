from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass
from dataclasses import field
from enum import Enum
from pathlib import Path
from typing import List
from typing import Optional
from typing import Tuple
from typing import Union

import numpy as np
import pandas as pd

from irtcoresets.exceptions import EmptyCoresetError
from irtcoresets.exceptions import InvalidArgumentError
from irtcoresets.utils import make_rng

logger = logging.getLogger(__name__)

_SAMPLING_STREAM = 0x5A


class SamplingMethod(str, Enum):
    IID_ALIAS = "alias"
    CHAO_RESERVOIR = "reservoir"
    WITHOUT_REPLACEMENT = "exhaustive"


def _empty_index() -> np.ndarray:
    return np.zeros(0, dtype=np.int64)


@dataclass(frozen=True)
class WeightedCoreset:
    """A weighted subsample of rows (examinees or items).

    Parameters
    ----------
    indices : array of int
        Sampled indices, with multiplicity for i.i.d. draws.
    u : array
        Coreset weight of each sampled index: ``S * w / (k * s)`` for i.i.d. and
        exhaustive draws, ``w / pi`` for a reservoir with inclusion probability ``pi``.
    scores : array
        The sampling score ``s`` of each sampled index.
    total : float
        ``S``, the sum of scores over the whole population.
    population : int
        Number of rows the coreset was drawn from.
    seed : int
    method : SamplingMethod
    forced : array of int
        Rows included outright with weight 1, outside the sample.
    """

    indices: np.ndarray
    u: np.ndarray
    scores: np.ndarray
    total: float
    population: int
    seed: int = 0
    method: SamplingMethod = SamplingMethod.IID_ALIAS
    forced: np.ndarray = field(default_factory=_empty_index)

    def __post_init__(self) -> None:
        indices = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        forced = np.asarray(self.forced, dtype=np.int64).reshape(-1)
        u = np.asarray(self.u, dtype=np.float64).reshape(-1)
        scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)

        if not (indices.size == u.size == scores.size):
            raise InvalidArgumentError("indices, u and scores must have equal length")
        if indices.size == 0 and forced.size == 0:
            raise EmptyCoresetError("a coreset needs at least one sampled or forced row")
        for name, values in (("indices", indices), ("forced", forced)):
            if np.any((values < 0) | (values >= self.population)):
                raise InvalidArgumentError(f"{name} must lie in [0, {self.population})")
        if np.any(u <= 0) or not np.all(np.isfinite(u)):
            raise InvalidArgumentError("coreset weights must be finite and strictly positive")

        arrays = (("indices", indices), ("forced", forced), ("u", u), ("scores", scores))
        for name, values in arrays:
            values.setflags(write=False)
            object.__setattr__(self, name, values)
        object.__setattr__(self, "method", SamplingMethod(self.method))

    @property
    def k(self) -> int:
        return int(self.indices.size)

    @property
    def probabilities(self) -> np.ndarray:
        return self.scores / self.total

    def row_weights(self, size: Optional[int] = None) -> np.ndarray:
        """Dense weight per row, duplicates folded and forced rows at weight 1."""
        size = self.population if size is None else size
        weights = np.bincount(self.indices, weights=self.u, minlength=size)
        weights += np.bincount(self.forced, minlength=size)
        return weights

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.row_weights() > 0)

    def to_frame(self) -> pd.DataFrame:
        sampled = pd.DataFrame(
            {
                "index": self.indices,
                "u": self.u,
                "score": self.scores,
                "forced": False,
                "total": self.total,
            }
        )
        forced = pd.DataFrame(
            {"index": self.forced, "u": 1.0, "score": np.nan, "forced": True, "total": self.total}
        )
        frames = [f for f in (sampled, forced) if len(f)]
        return pd.concat(frames, ignore_index=True)

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False)

    @classmethod
    def from_csv(
        cls,
        path: Union[str, Path],
        population: int,
        seed: int = 0,
        method: SamplingMethod = SamplingMethod.IID_ALIAS,
    ) -> WeightedCoreset:
        """Read a coreset written by :meth:`to_csv`."""
        try:
            frame = pd.read_csv(path, float_precision="round_trip")
        except FileNotFoundError as exc:
            raise FileNotFoundError(f"coreset file not found: {path}") from exc

        missing = {"index", "u", "score"} - set(frame.columns)
        if missing:
            raise InvalidArgumentError(f"{path}: missing coreset columns {sorted(missing)}")
        if "forced" in frame:
            is_forced = frame["forced"].astype(bool)
        else:
            is_forced = np.zeros(len(frame), bool)
        sampled = frame[~np.asarray(is_forced)]

        k = len(sampled)
        if "total" in frame and len(frame):
            total = float(frame["total"].iloc[0])
        elif k:
            # files without a total column: assumes unit input weights
            total = float(sampled["u"].iloc[0] * k * sampled["score"].iloc[0])
        else:
            total = 1.0
        return cls(
            indices=sampled["index"].to_numpy(),
            u=sampled["u"].to_numpy(),
            scores=sampled["score"].to_numpy(),
            total=total,
            population=population,
            seed=seed,
            method=method,
            forced=frame.loc[np.asarray(is_forced), "index"].to_numpy(),
        )


class AliasTable:
    """Vose alias table for O(1) draws from a discrete distribution."""

    def __init__(self, weights: np.ndarray) -> None:
        weights = np.asarray(weights, dtype=np.float64)
        size = weights.size
        scaled = weights * (size / weights.sum())
        self.prob = np.ones(size)
        self.alias = np.arange(size)

        small = [i for i in range(size) if scaled[i] < 1.0]
        large = [i for i in range(size) if scaled[i] >= 1.0]
        while small and large:
            lo = small.pop()
            hi = large.pop()
            self.prob[lo] = scaled[lo]
            self.alias[lo] = hi
            scaled[hi] = (scaled[hi] + scaled[lo]) - 1.0
            if scaled[hi] < 1.0:
                small.append(hi)
            else:
                large.append(hi)
        # leftovers are 1 up to rounding
        for i in small + large:
            self.prob[i] = 1.0

    def draw(self, rng: np.random.Generator, k: int) -> np.ndarray:
        slots = rng.integers(0, self.prob.size, size=k)
        coins = rng.random(k)
        return np.where(coins < self.prob[slots], slots, self.alias[slots])


class _Inclusion:
    """Running inclusion probabilities ``min(1, c * s)`` summing to ``k``.

    Rows with ``c * s >= 1`` are overweight and kept in a min-heap. ``c`` never
    grows as rows arrive, so a row that leaves the heap never rejoins it.
    """

    def __init__(self, k: int) -> None:
        self.k = k
        self.heavy: List[Tuple[float, int]] = []
        self.light_total = 0.0
        self.c = np.inf

    def add(self, index: int, score: float) -> None:
        heapq.heappush(self.heavy, (score, index))
        while self.heavy:
            smallest, _ = self.heavy[0]
            slots = self.k - len(self.heavy)
            if slots >= 0 and slots * smallest >= self.light_total:
                break
            heapq.heappop(self.heavy)
            self.light_total += smallest
        slots = self.k - len(self.heavy)
        self.c = slots / self.light_total if self.light_total > 0 else np.inf

    def probability(self, score: float) -> float:
        return min(1.0, self.c * score)


def inclusion_probabilities(scores: np.ndarray, k: int) -> np.ndarray:
    """Final ``min(1, c * s)`` of every row of a ``k`` row reservoir, zero for zero scores."""
    inclusion = _Inclusion(k)
    for index in np.flatnonzero(scores > 0):
        inclusion.add(int(index), float(scores[index]))
    with np.errstate(invalid="ignore"):
        return np.where(scores > 0, np.minimum(1.0, inclusion.c * scores), 0.0)


def chao_reservoir(scores: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """One-pass weighted reservoir of ``k`` distinct indices.

    After every arrival each row seen so far is in the reservoir with probability
    ``min(1, c * s)``, the cap ``c`` chosen so the probabilities sum to ``k``. An
    arriving row enters with its own probability and evicts member ``j`` with
    probability ``(1 - pi_j' / pi_j) / pi_new``.
    """
    candidates = np.flatnonzero(scores > 0)
    if candidates.size < k:
        raise InvalidArgumentError(
            f"a reservoir of {k} distinct rows needs as many positive scores, "
            f"got {candidates.size}"
        )
    inclusion = _Inclusion(k)
    for index in candidates[:k]:
        inclusion.add(int(index), float(scores[index]))
    reservoir = np.array(candidates[:k], dtype=np.int64)

    for index in candidates[k:]:
        score = float(scores[index])
        previous = inclusion.c
        inclusion.add(int(index), score)
        if rng.random() >= inclusion.probability(score):
            continue
        members = scores[reservoir]
        before = np.minimum(1.0, previous * members)
        after = np.minimum(1.0, inclusion.c * members)
        evict = np.clip(1.0 - after / before, 0.0, None)
        reservoir[rng.choice(k, p=evict / evict.sum())] = index
    return np.sort(reservoir)


def sample_weighted(
    scores: np.ndarray,
    k: int,
    seed: int,
    method: Union[SamplingMethod, str] = SamplingMethod.IID_ALIAS,
    weights: Optional[np.ndarray] = None,
    forced: Optional[np.ndarray] = None,
) -> WeightedCoreset:
    """Sample ``k`` rows with probability proportional to ``scores``.

    Parameters
    ----------
    scores : array of shape (n,)
        Nonnegative sampling scores, at least one positive.
    k : int
        Sample size.
    seed : int
    method : SamplingMethod
        ``alias`` draws i.i.d. with replacement; ``reservoir`` draws distinct rows in a
        single pass; ``exhaustive`` keeps every row with positive score (requires ``k``
        equal to their count).
    weights : array of shape (n,), optional
        Input row weights ``w``, ones by default.
    forced : array of int, optional
        Rows excluded from sampling and carried with weight 1.

    Returns
    -------
    WeightedCoreset
        Sampled indices with weights ``u = S * w / (k * s)``, ``S`` the total score.
        Reservoir draws carry ``u = w / pi`` instead, ``pi = min(1, c * s)`` the final
        inclusion probability of the row.

    Examples
    --------
    >>> coreset = sample_weighted(np.ones(4), k=2, seed=0)
    >>> coreset.u.tolist()
    [2.0, 2.0]
    """
    method = SamplingMethod(method)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if k < 1:
        raise InvalidArgumentError(f"sample size k must be positive, got {k}")
    if np.any(scores < 0) or not np.all(np.isfinite(scores)):
        raise InvalidArgumentError("scores must be finite and nonnegative")

    forced = _empty_index() if forced is None else np.asarray(forced, dtype=np.int64)
    pool = scores.copy()
    pool[forced] = 0.0
    total = float(pool.sum())
    if total <= 0:
        raise InvalidArgumentError("at least one score must be positive")
    w = np.ones_like(pool) if weights is None else np.asarray(weights, dtype=np.float64)

    rng = make_rng(seed, _SAMPLING_STREAM)
    if method is SamplingMethod.IID_ALIAS:
        indices = AliasTable(pool).draw(rng, k)
    elif method is SamplingMethod.CHAO_RESERVOIR:
        indices = chao_reservoir(pool, k, rng)
    else:
        indices = np.flatnonzero(pool > 0)
        if indices.size != k:
            raise InvalidArgumentError(
                f"exhaustive sampling keeps all {indices.size} rows, got k = {k}"
            )

    sampled = pool[indices]
    if method is SamplingMethod.CHAO_RESERVOIR:
        u = w[indices] / inclusion_probabilities(pool, k)[indices]
    else:
        u = total * w[indices] / (k * sampled)
    logger.debug("sampled %d of %d rows by %s (S = %.6g)", k, pool.size, method.value, total)
    return WeightedCoreset(
        indices=indices,
        u=u,
        scores=sampled,
        total=total,
        population=int(pool.size),
        seed=int(seed),
        method=method,
        forced=forced,
    )

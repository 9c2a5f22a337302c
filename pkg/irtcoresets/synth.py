from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any
from typing import Optional
from typing import Tuple

import numpy as np

from irtcoresets.exceptions import InvalidArgumentError
from irtcoresets.model import A_MAX
from irtcoresets.model import B_LIMIT
from irtcoresets.model import AbilityParameters
from irtcoresets.model import ItemParameters
from irtcoresets.model import ModelKind
from irtcoresets.model import ResponseMatrix
from irtcoresets.model import icc_probability
from irtcoresets.utils import make_rng

logger = logging.getLogger(__name__)

_STREAM_A = 1
_STREAM_B = 2
_STREAM_C = 3
_STREAM_THETA = 4
_STREAM_Y = 5


@dataclass(frozen=True)
class TruncatedNormal:
    mean: float
    sd: float
    lower: float = -np.inf
    upper: float = np.inf

    def __post_init__(self) -> None:
        if self.sd <= 0:
            raise InvalidArgumentError(f"standard deviation must be positive, got {self.sd}")
        if not self.lower < self.upper:
            raise InvalidArgumentError(f"empty truncation interval [{self.lower}, {self.upper})")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Rejection sampling on ``[lower, upper)``."""
        out = rng.normal(self.mean, self.sd, size)
        rejected = np.flatnonzero((out < self.lower) | (out >= self.upper))
        while rejected.size:
            out[rejected] = rng.normal(self.mean, self.sd, rejected.size)
            rejected = rejected[(out[rejected] < self.lower) | (out[rejected] >= self.upper)]
        return out


@dataclass(frozen=True)
class GenConfig:
    """Population and response generation settings.

    Parameters
    ----------
    n : int
        Number of examinees.
    m : int
        Number of items.
    model : ModelKind
    seed : int
    a, b, c, theta : TruncatedNormal
        Generating distributions. ``a`` is ignored for 1PL (all ones) and ``c`` for
        1PL/2PL (all zeros). ``c`` uses a standard deviation of 0.1.
    """

    n: int
    m: int
    model: ModelKind = ModelKind.TWO_PL
    seed: int = 0
    a: TruncatedNormal = TruncatedNormal(2.75, 0.3, lower=0.0, upper=A_MAX)
    b: TruncatedNormal = TruncatedNormal(0.0, 1.0, lower=-6.0, upper=6.0)
    c: TruncatedNormal = TruncatedNormal(0.1, 0.1, lower=0.0, upper=0.5)
    theta: TruncatedNormal = TruncatedNormal(0.0, 1.0, lower=-6.0, upper=6.0)

    def __post_init__(self) -> None:
        if self.n < 1 or self.m < 1:
            raise InvalidArgumentError(f"n and m must be positive, got n={self.n}, m={self.m}")
        object.__setattr__(self, "model", ModelKind.parse(self.model))
        if self.a.lower < 0 or self.a.upper > A_MAX:
            raise InvalidArgumentError(f"discrimination must be truncated within [0, {A_MAX:g}]")
        if self.b.lower < -B_LIMIT or self.b.upper > B_LIMIT:
            raise InvalidArgumentError(
                f"difficulty must be truncated within [-{B_LIMIT:g}, {B_LIMIT:g}]"
            )
        if self.c.lower < 0 or self.c.upper > 0.5:
            raise InvalidArgumentError("guessing must be truncated within [0, 0.5)")


def generate_parameters(config: GenConfig) -> Tuple[ItemParameters, AbilityParameters]:
    m, n = config.m, config.n
    if config.model is ModelKind.ONE_PL:
        a = np.ones(m)
    else:
        a = config.a.sample(make_rng(config.seed, _STREAM_A), m)
        # a draw of exactly 0 is accepted by [0, inf) but not by the model
        a = np.maximum(a, np.finfo(np.float64).tiny)
    b = config.b.sample(make_rng(config.seed, _STREAM_B), m)
    if config.model.has_guessing:
        c = config.c.sample(make_rng(config.seed, _STREAM_C), m)
    else:
        c = np.zeros(m)
    theta = config.theta.sample(make_rng(config.seed, _STREAM_THETA), n)
    return ItemParameters(a=a, b=b, c=c), AbilityParameters(theta=theta)


def sample_responses(
    items: ItemParameters, abilities: AbilityParameters, seed: int
) -> ResponseMatrix:
    """Draw ``Y_ij = +1`` with the model probability, one substream per item."""
    entries = np.empty((items.m, abilities.n), dtype=np.int8)
    for i in range(items.m):
        p = icc_probability(items.a[i], items.b[i], items.c[i], abilities.theta)
        draws = make_rng(seed, _STREAM_Y, i).random(abilities.n)
        entries[i] = np.where(draws < p, 1, -1)
    return ResponseMatrix(entries)


def generate_synthetic(
    config: Optional[GenConfig] = None, **kwargs: Any
) -> Tuple[ResponseMatrix, ItemParameters, AbilityParameters]:
    """Simulate a population and its responses.

    Examples
    --------
    >>> Y, items, abilities = generate_synthetic(n=20, m=3, seed=1)
    >>> Y.entries.shape
    (3, 20)
    """
    config = GenConfig(**kwargs) if config is None else config
    items, abilities = generate_parameters(config)
    Y = sample_responses(items, abilities, config.seed)
    logger.info(
        "generated %s responses for %d items x %d examinees (seed %d), pass rate %.3f",
        config.model.value, config.m, config.n, config.seed, float(np.mean(Y.entries == 1)),
    )
    return Y, items, abilities

from __future__ import annotations

import logging
from typing import Tuple
from typing import Union

import numpy as np

from irtcoresets.exceptions import InvalidArgumentError
from irtcoresets.samplers.weighted import SamplingMethod
from irtcoresets.samplers.weighted import WeightedCoreset
from irtcoresets.samplers.weighted import sample_weighted
from irtcoresets.utils import make_rng

logger = logging.getLogger(__name__)

DEFAULT_CENTERS = 25
_SEEDING_STREAM = 0xD1


def kmeans_pp_centers(
    points: np.ndarray, centers: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """k-means++ seeding.

    Parameters
    ----------
    points : array of shape (n, d)
    centers : int
    rng : numpy.random.Generator

    Returns
    -------
    tuple of arrays
        The chosen centers, shape ``(centers, d)``, and every point's squared distance
        to its nearest center.
    """
    n = points.shape[0]
    chosen = np.empty((centers, points.shape[1]))
    chosen[0] = points[rng.integers(n)]
    nearest = np.sum((points - chosen[0]) ** 2, axis=1)

    for i in range(1, centers):
        total = nearest.sum()
        if total > 0:
            pick = rng.choice(n, p=nearest / total)
        else:
            # every point already sits on a center
            pick = rng.integers(n)
        chosen[i] = points[pick]
        nearest = np.minimum(nearest, np.sum((points - chosen[i]) ** 2, axis=1))
    return chosen, nearest


def distance_scores(
    points: np.ndarray, centers: int = DEFAULT_CENTERS, seed: int = 0
) -> np.ndarray:
    """``dist^2 / sum dist^2 + 1/n`` to the nearest of ``centers`` k-means++ centers."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or not 1 <= centers <= points.shape[0]:
        raise InvalidArgumentError(
            f"need n >= centers >= 1 points as rows, got shape {points.shape} "
            f"and {centers} centers"
        )
    _, nearest = kmeans_pp_centers(points, centers, make_rng(seed, _SEEDING_STREAM))
    n = points.shape[0]
    total = nearest.sum()
    if total == 0:
        logger.debug("all %d points coincide with a center, distance scores are uniform", n)
        return np.full(n, 1.0 / n)
    return nearest / total + 1.0 / n


def distance_sampling_coreset(
    points: np.ndarray,
    k: int,
    centers: int = DEFAULT_CENTERS,
    seed: int = 0,
    method: Union[SamplingMethod, str] = SamplingMethod.IID_ALIAS,
) -> WeightedCoreset:
    """Sample rows proportionally to their squared distance from a rough clustering.

    Examples
    --------
    >>> coreset = distance_sampling_coreset(np.zeros((6, 2)), k=3, centers=2)
    >>> coreset.u.round(12).tolist()
    [2.0, 2.0, 2.0]
    """
    return sample_weighted(distance_scores(points, centers, seed), k, seed, method)

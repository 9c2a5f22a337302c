"""
Angular sweeps over directions in the plane

For a matrix ``X`` with two columns, quantities such as ``||X eta||_1`` or the signs
of ``X eta`` only change at the directions orthogonal to a row. Sorting the row
angles once lets every such quantity be evaluated at many directions with prefix
sums and binary search.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

TWO_PI = 2.0 * np.pi
HALF_PI = 0.5 * np.pi


def directions(angles: np.ndarray) -> np.ndarray:
    """Unit vectors ``(cos t, sin t)`` as rows."""
    angles = np.asarray(angles, dtype=np.float64)
    return np.column_stack([np.cos(angles), np.sin(angles)])


def nonzero_rows(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.flatnonzero(np.any(X != 0, axis=1))


def is_rank_two(X: np.ndarray, rtol: float = 1e-12) -> bool:
    if X.shape[0] < 2:
        return False
    singular = np.linalg.svd(X, compute_uv=False)
    return bool(singular[1] > rtol * singular[0])


@dataclass(frozen=True)
class AngularIndex:
    """Rows sorted by angle, with prefix sums over two turns of the circle.

    Parameters
    ----------
    X : array of shape (n, 2)
        Zero rows are ignored.
    """

    angles: np.ndarray
    prefix: np.ndarray
    total: np.ndarray

    @classmethod
    def build(cls, X: np.ndarray) -> AngularIndex:
        X = np.asarray(X, dtype=np.float64)
        rows = X[nonzero_rows(X)]
        angles = np.mod(np.arctan2(rows[:, 1], rows[:, 0]), TWO_PI)
        order = np.argsort(angles, kind="stable")
        angles, rows = angles[order], rows[order]

        doubled = np.concatenate([rows, rows])
        prefix = np.vstack([np.zeros((1, 2)), np.cumsum(doubled, axis=0)])
        return cls(
            angles=np.concatenate([angles, angles + TWO_PI]),
            prefix=prefix,
            total=rows.sum(axis=0),
        )

    @property
    def size(self) -> int:
        return int(self.angles.size // 2)

    def breakpoints(self) -> np.ndarray:
        """Sorted distinct directions in ``[0, 2 pi)`` orthogonal to some row."""
        base = self.angles[: self.size]
        return np.unique(np.mod(np.concatenate([base + HALF_PI, base - HALF_PI]), TWO_PI))

    def positive_side(self, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Count and sum of the rows with angle in ``(t - pi/2, t + pi/2)``.

        At a direction exactly orthogonal to some row that row may land on either
        side; its product with ``eta(t)`` is zero either way.
        """
        lo = np.mod(np.asarray(t, dtype=np.float64) - HALF_PI, TWO_PI)
        start = np.searchsorted(self.angles, lo, side="right")
        stop = np.searchsorted(self.angles, lo + np.pi, side="left")
        stop = np.minimum(stop, start + self.size)
        return stop - start, self.prefix[stop] - self.prefix[start]

    def l1_norms(self, t: np.ndarray) -> np.ndarray:
        """``||X eta(t)||_1`` for every angle in ``t``."""
        _, positive = self.positive_side(t)
        signed_sum = 2.0 * positive - self.total
        return np.maximum(np.sum(signed_sum * directions(t), axis=1), 0.0)


def zonotope_vertices(X: np.ndarray) -> np.ndarray:
    """Vertices, counter-clockwise, of ``{X^T v : ||v||_inf <= 1}``.

    This polygon is the unit ball of the norm dual to ``eta -> ||X eta||_1``. ``X``
    must have rank two.
    """
    X = np.asarray(X, dtype=np.float64)
    generators = X[nonzero_rows(X)]
    angles = np.arctan2(generators[:, 1], generators[:, 0])
    # fold every generator into the half-turn [0, pi)
    flip = (angles < 0) | (angles >= np.pi)
    generators = np.where(flip[:, None], -generators, generators)
    angles = np.mod(angles, np.pi)
    generators = generators[np.argsort(angles, kind="stable")]

    start = -generators.sum(axis=0)
    chain = start + 2.0 * np.vstack([np.zeros((1, 2)), np.cumsum(generators, axis=0)[:-1]])
    return np.vstack([chain, -chain])


def polygon_gauge(vertices: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Gauge (Minkowski functional) of a convex polygon around the origin.

    Parameters
    ----------
    vertices : array of shape (v, 2)
        Counter-clockwise vertices with the origin strictly inside.
    points : array of shape (n, 2)

    Returns
    -------
    array of shape (n,)
        Smallest ``lam >= 0`` with ``point`` in ``lam * polygon``.
    """
    vertex_angles = np.mod(np.arctan2(vertices[:, 1], vertices[:, 0]), TWO_PI)
    roll = int(np.argmin(vertex_angles))
    vertices = np.roll(vertices, -roll, axis=0)
    vertex_angles = np.roll(vertex_angles, -roll)

    edges = np.roll(vertices, -1, axis=0) - vertices
    normals = np.column_stack([edges[:, 1], -edges[:, 0]])
    offsets = np.sum(normals * vertices, axis=1)

    count = vertices.shape[0]
    point_angles = np.mod(np.arctan2(points[:, 1], points[:, 0]), TWO_PI)
    edge = np.searchsorted(vertex_angles, point_angles, side="right") - 1

    gauge = np.zeros(points.shape[0])
    # the bracketing edge or a neighbour when angles tie
    for shift in (-1, 0, 1):
        k = np.mod(edge + shift, count)
        ratio = np.sum(normals[k] * points, axis=1) / offsets[k]
        gauge = np.maximum(gauge, ratio)
    return gauge

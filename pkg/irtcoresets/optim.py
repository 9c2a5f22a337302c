"""
Batched box-constrained projected Newton

Every conditional problem in the alternating loop has the same shape: a handful of
free coordinates (two, or three with the guessing parameter) and a weighted sum of
pointwise losses over shared base rows. :class:`SignedBatch` stores ``B`` such
problems side by side so that one Newton iteration is a few array operations, and
:func:`projected_newton` runs them to convergence independently, dropping each
problem from the working set once it has converged.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List
from typing import Optional
from typing import Tuple
from typing import Union

import numpy as np

from irtcoresets.model import loss_derivatives
from irtcoresets.model import signed_losses

logger = logging.getLogger(__name__)

_ARMIJO = 1e-4
_MAX_HALVINGS = 40
_CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class SignedBatch:
    """``B`` conditional problems over shared base rows.

    Problem ``p`` evaluated at ``v`` has rows ``z[p, r] = signs[p, r] * (base[r] . v[:2])``
    and objective ``sum_r weights[r] * loss(z[p, r], c)``, where ``c`` is ``v[2]`` when
    the problem has three coordinates and ``c_fixed`` otherwise.

    Parameters
    ----------
    base : array of shape (R, 2)
    signs : array of shape (B, R)
        ``-Y`` for each problem and row; a row passes iff its sign is -1.
    weights : array of shape (R,)
    c_fixed : array broadcastable to (B, R)
        Guessing value per problem and row when ``c`` is not a variable.
    """

    base: np.ndarray
    signs: np.ndarray
    weights: np.ndarray
    c_fixed: np.ndarray

    @property
    def size(self) -> int:
        return int(self.signs.shape[0])

    def _c(self, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        if x.shape[1] == 3:
            return x[:, 2:3]
        if self.c_fixed.shape[0] == self.size and self.size > 1:
            return self.c_fixed[idx]
        return self.c_fixed

    def _linear(self, x: np.ndarray, idx: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        signs = self.signs[idx]
        return signs * (x[:, :2] @ self.base.T), signs

    def objective(self, x: np.ndarray, idx: np.ndarray) -> np.ndarray:
        z, signs = self._linear(x, idx)
        losses = signed_losses(z, signs < 0, self._c(x, idx))
        return np.sum(self.weights * losses, axis=1)

    def derivatives(self, x: np.ndarray, idx: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Gradient ``(b, D)`` and Hessian ``(b, D, D)`` of the selected problems."""
        z, signs = self._linear(x, idx)
        d = loss_derivatives(z, signs < 0, self._c(x, idx))
        base = self.base
        dim = x.shape[1]

        grad = np.empty((len(idx), dim))
        hess = np.empty((len(idx), dim, dim))
        grad[:, :2] = (self.weights * d.dz * signs) @ base

        products = np.column_stack([base[:, 0] ** 2, base[:, 0] * base[:, 1], base[:, 1] ** 2])
        curvature = (self.weights * d.dzz * signs**2) @ products
        hess[:, 0, 0] = curvature[:, 0]
        hess[:, 0, 1] = hess[:, 1, 0] = curvature[:, 1]
        hess[:, 1, 1] = curvature[:, 2]

        if dim == 3:
            grad[:, 2] = np.sum(self.weights * d.dc, axis=1)
            mixed = (self.weights * d.dzc * signs) @ base
            hess[:, 0, 2] = hess[:, 2, 0] = mixed[:, 0]
            hess[:, 1, 2] = hess[:, 2, 1] = mixed[:, 1]
            hess[:, 2, 2] = np.sum(self.weights * d.dcc, axis=1)
        return grad, hess

    def chunk(self, start: int, stop: int) -> SignedBatch:
        c_fixed = self.c_fixed
        if c_fixed.shape[0] == self.size and self.size > 1:
            c_fixed = c_fixed[start:stop]
        return SignedBatch(self.base, self.signs[start:stop], self.weights, c_fixed)


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    objective: np.ndarray
    initial_objective: np.ndarray
    steps: np.ndarray
    converged: np.ndarray


def _projected_gradient(
    x: np.ndarray, g: np.ndarray, lower: np.ndarray, upper: np.ndarray
) -> np.ndarray:
    return x - np.clip(x - g, lower, upper)


def _free_mask(
    x: np.ndarray, g: np.ndarray, lower: np.ndarray, upper: np.ndarray, eps: float
) -> np.ndarray:
    pinned = lower == upper
    at_lower = (x <= lower + eps) & (g > 0)
    at_upper = (x >= upper - eps) & (g < 0)
    return ~(pinned | at_lower | at_upper)


def _newton_direction(g: np.ndarray, hess: np.ndarray, free: np.ndarray) -> np.ndarray:
    """Reduced Newton step on the free coordinates, gradient step where it is not a descent."""
    g_free = np.where(free, g, 0.0)
    outer = free[:, :, None] & free[:, None, :]
    eye = np.eye(g.shape[1], dtype=bool)[None, :, :]
    reduced = np.where(outer, hess, np.where(eye, 1.0, 0.0))

    eigenvalues = np.linalg.eigvalsh(reduced)
    scale = np.maximum(np.abs(eigenvalues).max(axis=1), 1.0)
    definite = eigenvalues.min(axis=1) > 1e-12 * scale

    direction = -g_free
    if np.any(definite):
        solved = np.linalg.solve(reduced[definite], g_free[definite][:, :, None])[:, :, 0]
        direction[definite] = -solved

    not_descent = np.sum(direction * g_free, axis=1) >= 0
    direction[not_descent] = -g_free[not_descent]
    return direction


def _solve_chunk(
    batch: SignedBatch,
    x0: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    tol: float,
    max_steps: int,
) -> NewtonResult:
    x = np.clip(x0, lower, upper).astype(np.float64)
    everything = np.arange(batch.size)
    f = batch.objective(x, everything)
    f0 = f.copy()
    steps = np.zeros(batch.size, dtype=np.int64)
    converged = np.zeros(batch.size, dtype=bool)
    threshold = tol * max(1.0, float(np.sum(batch.weights)))
    eps = 1e-10 * float(np.max(upper - lower, initial=1.0))

    active = everything
    for _ in range(max_steps):
        if active.size == 0:
            break
        xa = x[active]
        g, hess = batch.derivatives(xa, active)

        pg_norm = np.linalg.norm(_projected_gradient(xa, g, lower, upper), axis=1)
        done = pg_norm <= threshold
        converged[active[done]] = True
        keep = ~done
        active, xa, g, hess = active[keep], xa[keep], g[keep], hess[keep]
        if active.size == 0:
            break

        direction = _newton_direction(g, hess, _free_mask(xa, g, lower, upper, eps))
        fa = f[active]
        step = np.ones(active.size)
        accepted = np.zeros(active.size, dtype=bool)
        x_new = xa.copy()
        f_new = fa.copy()
        for _ in range(_MAX_HALVINGS):
            pending = ~accepted
            if not np.any(pending):
                break
            trial = np.clip(xa[pending] + step[pending, None] * direction[pending], lower, upper)
            f_trial = batch.objective(trial, active[pending])
            decrease = _ARMIJO * np.sum(g[pending] * (trial - xa[pending]), axis=1)
            ok = np.isfinite(f_trial) & (f_trial <= fa[pending] + decrease)

            where = np.flatnonzero(pending)[ok]
            x_new[where] = trial[ok]
            f_new[where] = f_trial[ok]
            accepted[where] = True
            step[pending] *= 0.5

        moved = accepted & (np.max(np.abs(x_new - xa), axis=1) > 0.0)
        x[active] = np.where(moved[:, None], x_new, xa)
        f[active] = np.where(moved, f_new, fa)
        steps[active] += 1

        stalled = ~moved
        if np.any(stalled):
            logger.debug("line search stalled on %d problems", int(stalled.sum()))
            converged[active[stalled]] = pg_norm[keep][stalled] <= 1e3 * threshold
        active = active[moved]

    return NewtonResult(x=x, objective=f, initial_objective=f0, steps=steps, converged=converged)


def projected_newton(
    batch: SignedBatch,
    x0: np.ndarray,
    lower: Union[np.ndarray, List[float]],
    upper: Union[np.ndarray, List[float]],
    tol: float = 1e-8,
    max_steps: int = 200,
    threads: Optional[int] = None,
) -> NewtonResult:
    """Minimize every problem of ``batch`` over the box ``[lower, upper]``.

    Parameters
    ----------
    batch : SignedBatch
    x0 : array of shape (B, D)
        Starting points, projected onto the box before the first step.
    lower, upper : array of shape (D,)
        Box bounds; a coordinate with ``lower == upper`` is held fixed.
    tol : float
        Projected-gradient norm threshold, relative to the total row weight (at least 1).
    max_steps : int
        Newton iterations per problem.
    threads : int, optional
        Worker count over chunks of problems; results do not depend on it.

    Returns
    -------
    NewtonResult
        Per-problem minimizers, objectives at the start and end, and step counts.
    """
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    per_chunk = max(1, _CHUNK_ELEMENTS // max(1, batch.base.shape[0]))
    bounds = [(s, min(s + per_chunk, batch.size)) for s in range(0, batch.size, per_chunk)]

    def run(span: Tuple[int, int]) -> NewtonResult:
        start, stop = span
        return _solve_chunk(batch.chunk(start, stop), x0[start:stop], lower, upper, tol, max_steps)

    if threads is not None and threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(span) for span in bounds]

    return NewtonResult(
        x=np.concatenate([p.x for p in parts]),
        objective=np.concatenate([p.objective for p in parts]),
        initial_objective=np.concatenate([p.initial_objective for p in parts]),
        steps=np.concatenate([p.steps for p in parts]),
        converged=np.concatenate([p.converged for p in parts]),
    )

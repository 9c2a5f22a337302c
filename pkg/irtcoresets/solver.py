"""
Conditional maximum likelihood and the alternating main loop

Each main iteration first re-estimates every ability with the items fixed, then every
item with the abilities fixed. Both phases are batches of independent box-constrained
problems handed to :func:`irtcoresets.optim.projected_newton`. A
:class:`CoresetContext` replaces the sum over examinees (or items) by a weighted sum
over a coreset, and a :class:`CoresetSchedule` redraws that coreset every iteration.

Examples
--------
code ::
    from irtcoresets import FitConfig, ModelKind, alternate_fit

    items, abilities, trace = alternate_fit(Y, ModelKind.TWO_PL, FitConfig(max_main_iterations=20))
    trace.to_frame()
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from dataclasses import field
from enum import Enum
from time import perf_counter
from typing import Callable
from typing import List
from typing import NamedTuple
from typing import Optional
from typing import Tuple
from typing import Union

import numpy as np
import pandas as pd
from scipy.special import logit

from irtcoresets.exceptions import DegenerateScaleError
from irtcoresets.exceptions import DimensionMismatchError
from irtcoresets.exceptions import EmptyCoresetError
from irtcoresets.exceptions import InvalidArgumentError
from irtcoresets.exceptions import NumericalError
from irtcoresets.model import A_MAX
from irtcoresets.model import B_LIMIT
from irtcoresets.model import AbilityParameters
from irtcoresets.model import ItemParameters
from irtcoresets.model import ModelKind
from irtcoresets.model import Orientation
from irtcoresets.model import ResponseMatrix
from irtcoresets.model import SignedDesign
from irtcoresets.model import loss_derivatives
from irtcoresets.model import signed_losses
from irtcoresets.optim import NewtonResult
from irtcoresets.optim import SignedBatch
from irtcoresets.optim import projected_newton
from irtcoresets.samplers.weighted import WeightedCoreset
from irtcoresets.utils import irt_threads

logger = logging.getLogger(__name__)

INITIAL_GUESSING = 0.1
RESTART_GUESSING_OFFSET = 0.05


@dataclass(frozen=True)
class Bounds:
    """Boxes for every parameter during estimation."""

    a_min: float = 1e-3
    a_max: float = 5.0
    b_min: float = -6.0
    b_max: float = 6.0
    theta_min: float = -6.0
    theta_max: float = 6.0
    c_min: float = 0.0
    c_max: float = 0.499

    def __post_init__(self) -> None:
        if not 0 < self.a_min <= self.a_max:
            raise InvalidArgumentError(f"need 0 < a_min <= a_max, got {self.a_min}, {self.a_max}")
        if self.a_max > A_MAX or self.b_min < -B_LIMIT or self.b_max > B_LIMIT:
            raise InvalidArgumentError(
                f"item boxes must stay inside a <= {A_MAX:g} and |b| <= {B_LIMIT:g}"
            )
        if self.b_min > self.b_max or self.theta_min > self.theta_max:
            raise InvalidArgumentError("lower bounds must not exceed upper bounds")
        if not 0 <= self.c_min <= self.c_max < 0.5:
            raise InvalidArgumentError(
                f"need 0 <= c_min <= c_max < 0.5, got {self.c_min}, {self.c_max}"
            )

    def item_box(self, model: ModelKind) -> Tuple[np.ndarray, np.ndarray]:
        """Box over ``(a, b)``, or ``(a, b, c)`` for 3PL; 1PL pins ``a = 1``."""
        model = ModelKind.parse(model)
        a_lo, a_hi = self.a_min, self.a_max
        if model is ModelKind.ONE_PL:
            if not a_lo <= 1.0 <= a_hi:
                raise InvalidArgumentError("1PL needs a = 1 inside [a_min, a_max]")
            a_lo = a_hi = 1.0
        lower = [a_lo, self.b_min]
        upper = [a_hi, self.b_max]
        if model.has_guessing:
            lower.append(self.c_min)
            upper.append(self.c_max)
        return np.array(lower), np.array(upper)

    def examinee_box(self) -> Tuple[np.ndarray, np.ndarray]:
        """Box over ``(theta, -1)``; the second coordinate is pinned."""
        return np.array([self.theta_min, -1.0]), np.array([self.theta_max, -1.0])


@dataclass(frozen=True)
class FitConfig:
    """Settings of :func:`alternate_fit`.

    Parameters
    ----------
    max_main_iterations : int
        Budget of alternating iterations, by default 50.
    inner_tolerance : float
        Projected-gradient norm threshold of each conditional solve, relative to the
        total row weight.
    inner_max_steps : int
        Newton iterations per conditional solve.
    bounds : Bounds
    seed : int
    monotone_guard : bool
        Reject any update that raises the objective.
    relative_tolerance : float
        Stop once an iteration improves the objective by less than this fraction.
    standardize : bool
        Standardize the abilities once after the last iteration.
    threads : int, optional
        Worker cap for batched solves, further capped by ``IRT_THREADS``.
    """

    max_main_iterations: int = 50
    inner_tolerance: float = 1e-8
    inner_max_steps: int = 200
    bounds: Bounds = field(default_factory=Bounds)
    seed: int = 0
    monotone_guard: bool = True
    relative_tolerance: float = 1e-10
    standardize: bool = True
    threads: Optional[int] = None

    def __post_init__(self) -> None:
        if self.max_main_iterations < 1:
            raise InvalidArgumentError("max_main_iterations must be at least 1")
        if self.inner_max_steps < 1:
            raise InvalidArgumentError("inner_max_steps must be at least 1")
        if self.inner_tolerance <= 0 or self.relative_tolerance < 0:
            raise InvalidArgumentError("tolerances must be positive")


@dataclass
class FitTrace:
    """Objective per main iteration (entry 0 is the initialization) and phase timings.

    Under a :class:`CoresetSchedule`, ``sampling_seconds`` holds the time of every
    redraw and ``coreset`` the last coreset drawn.
    """

    model: ModelKind
    objectives: List[float] = field(default_factory=list)
    step_2a_seconds: List[float] = field(default_factory=list)
    step_2b_seconds: List[float] = field(default_factory=list)
    inner_steps: List[int] = field(default_factory=list)
    init_seconds: float = 0.0
    finalize_seconds: float = 0.0
    sampling_seconds: List[float] = field(default_factory=list)
    guard_rejections: int = 0
    converged: bool = False
    on_coreset: bool = False
    standardized: bool = False
    items: Optional[ItemParameters] = None
    abilities: Optional[AbilityParameters] = None
    coreset: Optional[WeightedCoreset] = None

    @property
    def iterations(self) -> int:
        return len(self.objectives) - 1

    @property
    def final_objective(self) -> float:
        return self.objectives[-1]

    @property
    def total_seconds(self) -> float:
        return (
            self.init_seconds
            + sum(self.step_2a_seconds)
            + sum(self.step_2b_seconds)
            + sum(self.sampling_seconds)
            + self.finalize_seconds
        )

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.objectives) <= 0))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "iteration": np.arange(len(self.objectives)),
                "objective": self.objectives,
                "sampling_seconds": [0.0] + self.sampling_seconds,
                "step_2a_seconds": [0.0] + self.step_2a_seconds,
                "step_2b_seconds": [0.0] + self.step_2b_seconds,
                "inner_steps": [0] + self.inner_steps,
            }
        )


class FitResult(NamedTuple):
    items: ItemParameters
    abilities: AbilityParameters
    trace: FitTrace


class CoresetDirection(str, Enum):
    EXAMINEES = "examinees"
    ITEMS = "items"


@dataclass(frozen=True)
class CoresetContext:
    """A response matrix with one of its dimensions compressed by a weighted coreset."""

    Y: ResponseMatrix
    coreset: WeightedCoreset
    direction: CoresetDirection = CoresetDirection.EXAMINEES

    def __post_init__(self) -> None:
        direction = CoresetDirection(self.direction)
        object.__setattr__(self, "direction", direction)
        expected = self.Y.n if direction is CoresetDirection.EXAMINEES else self.Y.m
        if self.coreset.population != expected:
            raise DimensionMismatchError(
                f"coreset drawn from {self.coreset.population} {direction.value}, "
                f"responses have {expected}"
            )
        if not np.any(self.coreset.row_weights() > 0):
            raise EmptyCoresetError("coreset context has no positively weighted rows")

    def weights(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-item and per-examinee weights of the coreset objective."""
        compressed = self.coreset.row_weights()
        if self.direction is CoresetDirection.EXAMINEES:
            return np.ones(self.Y.m), compressed
        return compressed, np.ones(self.Y.n)


CoresetDraw = Callable[[ItemParameters, AbilityParameters, int], WeightedCoreset]


@dataclass(frozen=True)
class CoresetSchedule:
    """A response matrix whose coreset is redrawn from the current estimates.

    ``draw(items, abilities, iteration)`` is called once per main iteration, right
    before the compressed step: after the ability step for a coreset over examinees,
    before it for a coreset over items. The other step runs on the full data.
    """

    Y: ResponseMatrix
    draw: CoresetDraw
    direction: CoresetDirection = CoresetDirection.EXAMINEES

    def __post_init__(self) -> None:
        object.__setattr__(self, "direction", CoresetDirection(self.direction))

    def context(
        self, items: ItemParameters, abilities: AbilityParameters, iteration: int
    ) -> CoresetContext:
        return CoresetContext(self.Y, self.draw(items, abilities, iteration), self.direction)


class ConditionalFit(NamedTuple):
    params: np.ndarray
    objective: float
    steps: int
    converged: bool


def conditional_gradient(
    design: SignedDesign,
    eta: Union[np.ndarray, List[float]],
    c: Optional[Union[float, np.ndarray]] = None,
    wrt_c: bool = False,
) -> np.ndarray:
    """Analytic gradient of :func:`irtcoresets.model.conditional_nll` in ``eta``.

    Parameters
    ----------
    design : SignedDesign
    eta : array of shape (2,)
    c : float or array, optional
        Guessing value overriding the design's per-row values.
    wrt_c : bool
        Append the derivative in a shared ``c`` (the 3PL item step).

    Examples
    --------
    >>> design = SignedDesign(rows=[[1.0, 2.0], [-1.0, -2.0]], labels=[1, -1])
    >>> conditional_gradient(design, [0.0, 0.0]).tolist()
    [0.0, 0.0]
    """
    eta = np.asarray(eta, dtype=np.float64).reshape(2)
    c_rows = design.c if c is None else np.broadcast_to(np.asarray(c, float), (len(design),))
    d = loss_derivatives(design.rows @ eta, design.passed, c_rows)
    grad = (design.weights * d.dz) @ design.rows
    if wrt_c:
        return np.append(grad, np.sum(design.weights * d.dc))
    return grad


def _single_batch(design: SignedDesign, copies: int) -> SignedBatch:
    # recover base rows from x = -Y * base so that signs carry the labels
    signs = -design.labels.astype(np.float64)
    base = signs[:, None] * design.rows
    return SignedBatch(
        base=base,
        signs=np.repeat(signs[None, :], copies, axis=0),
        weights=design.weights,
        c_fixed=design.c[None, :],
    )


def fit_conditional(
    design: SignedDesign,
    kind: Union[ModelKind, str],
    bounds: Optional[Bounds] = None,
    init: Optional[Union[np.ndarray, List[float]]] = None,
    tol: float = 1e-8,
    orientation: Union[Orientation, str] = Orientation.BY_ITEM,
    max_steps: int = 200,
) -> ConditionalFit:
    """Minimize one conditional objective over its box.

    For an item design the variables are ``(a, b)``, or ``(a, b, c)`` under 3PL, where
    the solve also restarts from ``(1, 0, c_min + 0.05)`` and keeps the better of the two.
    For an examinee design the variables are ``(theta, -1)`` with the second pinned.

    Separable designs do not fail: the minimizer runs into the box.
    """
    kind = ModelKind.parse(kind)
    bounds = Bounds() if bounds is None else bounds
    orientation = Orientation(orientation)

    if orientation is Orientation.BY_EXAMINEE:
        lower, upper = bounds.examinee_box()
        default = np.array([0.0, -1.0])
    else:
        lower, upper = bounds.item_box(kind)
        default = np.array([1.0, 0.0, max(bounds.c_min, INITIAL_GUESSING)])[: lower.size]

    start = default if init is None else np.asarray(init, dtype=np.float64).reshape(-1)
    if orientation is Orientation.BY_EXAMINEE and start.size == 1:
        start = np.array([start[0], -1.0])
    if start.size != lower.size:
        raise InvalidArgumentError(f"expected an initial point of size {lower.size}")

    starts = [start]
    if orientation is Orientation.BY_ITEM and kind.has_guessing:
        starts.append(np.array([1.0, 0.0, bounds.c_min + RESTART_GUESSING_OFFSET]))

    result = projected_newton(
        _single_batch(design, len(starts)), np.vstack(starts), lower, upper, tol, max_steps
    )
    best = 0
    for candidate in range(1, len(starts)):
        if result.objective[candidate] < result.objective[best]:
            best = candidate
    return ConditionalFit(
        params=result.x[best],
        objective=float(result.objective[best]),
        steps=int(result.steps[best]),
        converged=bool(result.converged[best]),
    )


def standardize(
    items: ItemParameters, abilities: AbilityParameters, scale: bool = True
) -> Tuple[ItemParameters, AbilityParameters]:
    """Move abilities to zero mean and unit population variance.

    Items follow so that every ``a * theta - b`` is unchanged: ``a' = a * sd`` and
    ``b' = b - a * mean``. With ``scale=False`` only the mean is removed (1PL). Items
    pushed out of the domain ``a <= 5``, ``|b| <= 6`` are clipped back with a warning,
    and only those items change their linear terms.

    Examples
    --------
    >>> items, abilities = standardize(ItemParameters(a=[1.0], b=[0.0]),
    ...                                AbilityParameters(theta=[1.0, 3.0]))
    >>> abilities.theta.tolist(), items.a.tolist(), items.b.tolist()
    ([-1.0, 1.0], [1.0], [-2.0])
    """
    theta = abilities.theta
    if theta.size < 2:
        raise InvalidArgumentError("standardization needs at least two abilities")
    mean = float(np.mean(theta))
    sd = float(np.std(theta)) if scale else 1.0
    if sd <= 0:
        raise DegenerateScaleError("abilities have zero standard deviation")

    a = items.a * sd
    b = items.b - items.a * mean
    outside = int(np.sum((a > A_MAX) | (np.abs(b) > B_LIMIT)))
    if outside:
        logger.warning(
            "%d standardized items left the parameter domain and were clipped to it", outside
        )
    new_items = ItemParameters(a=np.minimum(a, A_MAX), b=np.clip(b, -B_LIMIT, B_LIMIT), c=items.c)
    return new_items, AbilityParameters(theta=(theta - mean) / sd)


class _State:
    """Mutable parameter arrays of one alternating fit."""

    def __init__(self, a: np.ndarray, b: np.ndarray, c: np.ndarray, theta: np.ndarray) -> None:
        self.a = a
        self.b = b
        self.c = c
        self.theta = theta

    def objective(self, Y: ResponseMatrix, item_w: np.ndarray, ex_w: np.ndarray) -> float:
        rows = np.flatnonzero(item_w > 0)
        cols = np.flatnonzero(ex_w > 0)
        labels = Y.entries[np.ix_(rows, cols)]
        linear = self.a[rows, None] * self.theta[None, cols] - self.b[rows, None]
        losses = signed_losses(-labels * linear, labels == 1, self.c[rows, None])
        return float(np.sum(item_w[rows, None] * ex_w[None, cols] * losses))

    def parameters(self) -> Tuple[ItemParameters, AbilityParameters]:
        items = ItemParameters(a=self.a, b=self.b, c=self.c)
        return items, AbilityParameters(theta=self.theta)


def _item_losses(
    Y: ResponseMatrix,
    rows: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    theta: np.ndarray,
) -> np.ndarray:
    """Unweighted loss of each item in ``rows`` over all examinees."""
    labels = Y.entries[rows]
    linear = a[:, None] * theta[None, :] - b[:, None]
    return signed_losses(-labels * linear, labels == 1, c[:, None]).sum(axis=1)


def _examinee_losses(
    Y: ResponseMatrix, cols: np.ndarray, state: _State, theta: np.ndarray
) -> np.ndarray:
    """Unweighted loss of each examinee in ``cols`` at ``theta`` over all items."""
    labels = Y.entries[:, cols]
    linear = state.a[:, None] * theta[None, :] - state.b[:, None]
    return signed_losses(-labels * linear, labels == 1, state.c[:, None]).sum(axis=0)


def _initial_state(
    Y: ResponseMatrix, model: ModelKind, bounds: Bounds, item_w: np.ndarray, ex_w: np.ndarray
) -> _State:
    passed = Y.entries == 1
    score = item_w @ passed
    sd = float(np.std(score))
    theta = (score - score.mean()) / sd if sd > 0 else np.zeros(Y.n)
    theta = np.clip(theta, bounds.theta_min, bounds.theta_max)

    failure = ((~passed) @ ex_w) / float(np.sum(ex_w))
    with np.errstate(divide="ignore"):
        b = np.clip(logit(failure), bounds.b_min, bounds.b_max)
    a_start = 1.0 if model is ModelKind.ONE_PL else np.clip(1.0, bounds.a_min, bounds.a_max)
    a = np.full(Y.m, a_start)
    if model.has_guessing:
        c = np.full(Y.m, min(max(bounds.c_min, INITIAL_GUESSING), bounds.c_max))
    else:
        c = np.zeros(Y.m)
    return _State(a=a, b=b, c=c, theta=theta)


def initial_estimates(
    Y: ResponseMatrix, model: Union[ModelKind, str], bounds: Optional[Bounds] = None
) -> Tuple[ItemParameters, AbilityParameters]:
    """Starting values of :func:`alternate_fit` on the full data.

    Abilities are standardized sum scores and difficulties the logit of each item's
    failure rate; discriminations start at 1 and guessing values at 0.1.
    """
    bounds = Bounds() if bounds is None else bounds
    state = _initial_state(Y, ModelKind.parse(model), bounds, np.ones(Y.m), np.ones(Y.n))
    items = ItemParameters(a=state.a, b=state.b, c=state.c)
    return items, AbilityParameters(theta=state.theta)


def _accept(result: NewtonResult, guard: bool) -> np.ndarray:
    """Mask of problems whose update is kept; ties keep the incumbent."""
    if not guard:
        return np.ones(result.objective.size, dtype=bool)
    return result.objective < result.initial_objective


def _examinee_step(
    Y: ResponseMatrix,
    state: _State,
    item_w: np.ndarray,
    cols: np.ndarray,
    config: FitConfig,
    threads: int,
    full_check: bool = False,
) -> Tuple[int, int]:
    rows = np.flatnonzero(item_w > 0)
    batch = SignedBatch(
        base=np.column_stack([state.a[rows], state.b[rows]]),
        signs=-Y.entries[np.ix_(rows, cols)].T.astype(np.float64),
        weights=item_w[rows],
        c_fixed=state.c[rows][None, :],
    )
    lower, upper = config.bounds.examinee_box()
    x0 = np.column_stack([state.theta[cols], -np.ones(cols.size)])
    result = projected_newton(
        batch, x0, lower, upper, config.inner_tolerance, config.inner_max_steps, threads
    )
    keep = _accept(result, config.monotone_guard)
    if full_check and config.monotone_guard:
        before = _examinee_losses(Y, cols, state, state.theta[cols])
        keep = _examinee_losses(Y, cols, state, result.x[:, 0]) < before
    state.theta[cols[keep]] = result.x[keep, 0]
    return int(np.sum(~keep & (result.x[:, 0] != x0[:, 0]))), int(result.steps.sum())


def _item_step(
    Y: ResponseMatrix,
    state: _State,
    model: ModelKind,
    ex_w: np.ndarray,
    rows: np.ndarray,
    config: FitConfig,
    threads: int,
    full_check: bool = False,
) -> Tuple[int, int]:
    cols = np.flatnonzero(ex_w > 0)
    batch = SignedBatch(
        base=np.column_stack([state.theta[cols], -np.ones(cols.size)]),
        signs=-Y.entries[np.ix_(rows, cols)].astype(np.float64),
        weights=ex_w[cols],
        c_fixed=state.c[rows][:, None],
    )
    lower, upper = config.bounds.item_box(model)
    incumbent = np.column_stack([state.a[rows], state.b[rows]])
    if model.has_guessing:
        incumbent = np.column_stack([incumbent, state.c[rows]])
    solve = (lower, upper, config.inner_tolerance, config.inner_max_steps, threads)
    result = projected_newton(batch, incumbent, *solve)
    steps = int(result.steps.sum())

    if model.has_guessing:
        restart_point = [1.0, 0.0, config.bounds.c_min + RESTART_GUESSING_OFFSET]
        restart = np.tile(restart_point, (rows.size, 1))
        alternative = projected_newton(batch, restart, *solve)
        steps += int(alternative.steps.sum())
        swap = alternative.objective < result.objective
        result = NewtonResult(
            x=np.where(swap[:, None], alternative.x, result.x),
            objective=np.where(swap, alternative.objective, result.objective),
            initial_objective=result.initial_objective,
            steps=result.steps + alternative.steps,
            converged=np.where(swap, alternative.converged, result.converged),
        )

    keep = _accept(result, config.monotone_guard)
    if full_check and config.monotone_guard:
        c_new = result.x[:, 2] if model.has_guessing else state.c[rows]
        before = _item_losses(Y, rows, state.a[rows], state.b[rows], state.c[rows], state.theta)
        after = _item_losses(Y, rows, result.x[:, 0], result.x[:, 1], c_new, state.theta)
        keep = after < before
    state.a[rows[keep]] = result.x[keep, 0]
    state.b[rows[keep]] = result.x[keep, 1]
    if model.has_guessing:
        state.c[rows[keep]] = result.x[keep, 2]
    rejected = ~keep & np.any(result.x != np.clip(incumbent, lower, upper), axis=1)
    return int(np.sum(rejected)), steps


def alternate_fit(
    data: Union[ResponseMatrix, CoresetContext, CoresetSchedule],
    model: Union[ModelKind, str],
    config: Optional[FitConfig] = None,
) -> FitResult:
    """Alternating conditional maximum likelihood.

    Parameters
    ----------
    data : ResponseMatrix, CoresetContext or CoresetSchedule
        With a fixed coreset over examinees, the item step sums only over coreset
        examinees weighted by ``u``; over items, the ability step sums only over
        coreset items. A schedule redraws the coreset every iteration, runs the other
        step on the full data and keeps a compressed update only if it lowers the
        full-data loss of its row.
    model : ModelKind
    config : FitConfig, optional

    Returns
    -------
    FitResult
        Unpacks as ``(items, abilities, trace)``. ``trace.objectives`` holds the
        objective being minimized (the coreset objective for a fixed coreset, the full
        objective otherwise), non-increasing when the monotone guard is on. Rows
        outside a fixed coreset are estimated once against the final parameters.
    """
    model = ModelKind.parse(model)
    config = FitConfig() if config is None else config
    threads = irt_threads(config.threads)

    schedule = data if isinstance(data, CoresetSchedule) else None
    if isinstance(data, CoresetContext):
        Y = data.Y
        item_w, ex_w = data.weights()
    else:
        Y = data.Y if schedule is not None else data
        item_w, ex_w = np.ones(Y.m), np.ones(Y.n)
    trace = FitTrace(model=model, on_coreset=not isinstance(data, ResponseMatrix))
    ex_support = np.flatnonzero(ex_w > 0)
    item_support = np.flatnonzero(item_w > 0)

    started = perf_counter()
    state = _initial_state(Y, model, config.bounds, item_w, ex_w)
    current = state.objective(Y, item_w, ex_w)
    trace.objectives.append(current)
    trace.init_seconds = perf_counter() - started
    logger.info(
        "fitting %s on %d items x %d examinees (%d x %d weighted), initial objective %.6f",
        model.value, Y.m, Y.n, item_support.size, ex_support.size, current,
    )

    for iteration in range(1, config.max_main_iterations + 1):
        snapshot = _State(state.a.copy(), state.b.copy(), state.c.copy(), state.theta.copy())
        step_item_w, step_ex_w = item_w, ex_w
        sampling = 0.0

        if schedule is not None and schedule.direction is CoresetDirection.ITEMS:
            step_item_w, _ = _redraw(schedule, state, iteration, trace)
            sampling = trace.sampling_seconds[-1]
        tick = perf_counter()
        rejected_a, steps_a = _examinee_step(
            Y, state, step_item_w, ex_support, config, threads, full_check=schedule is not None
        )
        trace.step_2a_seconds.append(perf_counter() - tick)

        if schedule is not None and schedule.direction is CoresetDirection.EXAMINEES:
            _, step_ex_w = _redraw(schedule, state, iteration, trace)
            sampling = trace.sampling_seconds[-1]
        tick = perf_counter()
        rejected_b, steps_b = _item_step(
            Y, state, model, step_ex_w, item_support, config, threads,
            full_check=schedule is not None,
        )
        trace.step_2b_seconds.append(perf_counter() - tick)
        if schedule is None:
            trace.sampling_seconds.append(sampling)
        trace.inner_steps.append(steps_a + steps_b)
        trace.guard_rejections += rejected_a + rejected_b

        updated = state.objective(Y, item_w, ex_w)
        if not np.isfinite(updated):
            raise NumericalError(f"objective became non-finite at iteration {iteration}")
        if config.monotone_guard and updated > current:
            logger.debug(
                "iteration %d raised the objective by %.3g, reverted", iteration, updated - current
            )
            trace.guard_rejections += 1
            state, updated = snapshot, current

        improvement = (current - updated) / max(abs(current), np.finfo(float).tiny)
        trace.objectives.append(updated)
        current = updated
        logger.info(
            "iteration %d: objective %.8f (sampling %.3fs, 2a %.3fs, 2b %.3fs)",
            iteration, updated, sampling, trace.step_2a_seconds[-1], trace.step_2b_seconds[-1],
        )
        if improvement < config.relative_tolerance:
            trace.converged = True
            break

    tick = perf_counter()
    _finalize(Y, state, model, item_w, ex_w, config, threads)
    items, abilities = state.parameters()
    if config.standardize:
        items, abilities = standardize(items, abilities, scale=model is not ModelKind.ONE_PL)
        trace.standardized = True
    trace.finalize_seconds = perf_counter() - tick

    trace.items, trace.abilities = items, abilities
    logger.info(
        "finished after %d iterations, objective %.8f, %.3fs",
        trace.iterations, trace.final_objective, trace.total_seconds,
    )
    return FitResult(items, abilities, trace)


def _redraw(
    schedule: CoresetSchedule, state: _State, iteration: int, trace: FitTrace
) -> Tuple[np.ndarray, np.ndarray]:
    """Draw the coreset of this iteration from the current estimates."""
    tick = perf_counter()
    context = schedule.context(*state.parameters(), iteration)
    trace.sampling_seconds.append(perf_counter() - tick)
    trace.coreset = context.coreset
    logger.debug(
        "iteration %d: drew %d of %d %s", iteration, context.coreset.support().size,
        context.coreset.population, schedule.direction.value,
    )
    return context.weights()


def _finalize(
    Y: ResponseMatrix,
    state: _State,
    model: ModelKind,
    item_w: np.ndarray,
    ex_w: np.ndarray,
    config: FitConfig,
    threads: int,
) -> None:
    """Estimate rows left out of the coreset against the final parameters."""
    skipped_examinees = np.flatnonzero(ex_w <= 0)
    if skipped_examinees.size:
        _examinee_step(Y, state, item_w, skipped_examinees, config, threads)
    skipped_items = np.flatnonzero(item_w <= 0)
    if skipped_items.size:
        _item_step(Y, state, model, np.ones(Y.n), skipped_items, config, threads)

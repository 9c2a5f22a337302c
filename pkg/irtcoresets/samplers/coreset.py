"""
Sensitivity scores and coreset assembly

One coreset over examinees serves every item's conditional problem (and one over
items every examinee's), because ℓ2 leverage scores do not change when rows flip
sign. For 2PL the score of a row is ``sqrt(leverage) + 1/N``. For 3PL each design
splits into failed rows, scored through ``mu_1`` and the leverage, and passed rows,
which share ``3.5 E (1 + mu_0) / m''``; the shared score of a row is the largest
rounded score it receives in any design.

Examples
--------
code ::
    from irtcoresets import CoresetContext, alternate_fit, build_coreset

    coreset = build_coreset(Y, items, abilities, "2pl", k=200, seed=3)
    alternate_fit(CoresetContext(Y, coreset), "2pl")
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from time import perf_counter
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np

from irtcoresets.exceptions import DegenerateLabelsError
from irtcoresets.exceptions import InvalidArgumentError
from irtcoresets.exceptions import UndefinedComplexityError
from irtcoresets.leverage import leverage_l2
from irtcoresets.leverage import leverage_l2_sketched
from irtcoresets.model import AbilityParameters
from irtcoresets.model import ItemParameters
from irtcoresets.model import ModelKind
from irtcoresets.model import ResponseMatrix
from irtcoresets.model import SignedDesign
from irtcoresets.model import signed_losses
from irtcoresets.mu import EXACT_SIZE_LIMIT
from irtcoresets.mu import MuEstimate
from irtcoresets.mu import MuMethod
from irtcoresets.mu import mu_estimate
from irtcoresets.samplers.weighted import SamplingMethod
from irtcoresets.samplers.weighted import WeightedCoreset
from irtcoresets.samplers.weighted import sample_weighted
from irtcoresets.solver import Bounds
from irtcoresets.solver import CoresetDirection
from irtcoresets.utils import derive_seed

logger = logging.getLogger(__name__)

FAIL_CONSTANT = 42.5
PASS_CONSTANT = 3.5
C_CUTOFF = 0.499


class MuPolicy(str, Enum):
    AUTO = "auto"
    HEURISTIC = "heuristic"
    EXACT = "exact"
    FIXED = "fixed"


@dataclass(frozen=True)
class CoresetOptions:
    """Settings of :func:`build_coreset`.

    Parameters
    ----------
    sketched : bool
        Use CountSketch leverage scores instead of the exact QR.
    sketch_rows : int
    rounds : int
        Re-apply the construction to its own weighted output. Values above 1 are
        experimental.
    mu_policy : MuPolicy
        ``auto`` runs the exact sweep on designs of at most 5000 rows and the
        heuristic otherwise; ``fixed`` uses ``mu_value`` for every design.
    mu_value : float, optional
    method : SamplingMethod
    epsilon : float
        Accuracy target of the guessing grid; it does not set the sample size.
    kappa : float
        Guessing values are clamped to at least ``1 / kappa`` before scoring.
    direction : CoresetDirection
        Compress examinees (the default) or items.
    """

    sketched: bool = False
    sketch_rows: int = 64
    rounds: int = 1
    mu_policy: MuPolicy = MuPolicy.AUTO
    mu_value: Optional[float] = None
    method: SamplingMethod = SamplingMethod.IID_ALIAS
    epsilon: float = 0.1
    kappa: float = 10.0
    direction: CoresetDirection = CoresetDirection.EXAMINEES

    def __post_init__(self) -> None:
        object.__setattr__(self, "mu_policy", MuPolicy(self.mu_policy))
        object.__setattr__(self, "method", SamplingMethod(self.method))
        object.__setattr__(self, "direction", CoresetDirection(self.direction))
        if self.rounds < 1:
            raise InvalidArgumentError(f"rounds must be at least 1, got {self.rounds}")
        if not 0 < self.epsilon < 1:
            raise InvalidArgumentError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.kappa <= 1 / C_CUTOFF:
            raise InvalidArgumentError(f"kappa must exceed {1 / C_CUTOFF:.4f}, got {self.kappa}")
        if self.mu_policy is MuPolicy.FIXED and (self.mu_value is None or self.mu_value < 1):
            raise InvalidArgumentError("a fixed mu policy needs mu_value >= 1")


def round_up_pow2(values: np.ndarray) -> np.ndarray:
    """Round positive values up to the next power of two.

    Examples
    --------
    >>> round_up_pow2(np.array([21.25, 0.693, 4.0])).tolist()
    [32.0, 1.0, 4.0]
    """
    values = np.asarray(values, dtype=np.float64)
    if np.any(values <= 0):
        raise InvalidArgumentError("only positive values can be rounded to a power of two")
    return np.exp2(np.ceil(np.log2(values)))


def round_guessing(
    c: np.ndarray, mu: float, epsilon: float = 0.1, kappa: float = 10.0
) -> np.ndarray:
    """Clamp guessing values to ``[1/kappa, 0.499]`` and round them up to a grid.

    The grid spacing is ``epsilon / (6 kappa mu^2)``; shifting every ``c`` up by at
    most this much changes each conditional objective by a factor of at most
    ``1 + epsilon``.
    """
    spacing = epsilon / (6.0 * kappa * mu**2)
    clamped = np.maximum(np.asarray(c, dtype=np.float64), 1.0 / kappa)
    return np.minimum(np.ceil(clamped / spacing) * spacing, C_CUTOFF)


def _fixed_rows(fixed: Union[AbilityParameters, ItemParameters, np.ndarray]) -> np.ndarray:
    if isinstance(fixed, AbilityParameters):
        return fixed.beta
    if isinstance(fixed, ItemParameters):
        return fixed.alpha
    return np.asarray(fixed, dtype=np.float64)


def _leverage(rows: np.ndarray, sketched: bool, seed: int, sketch_rows: int) -> np.ndarray:
    if sketched:
        return leverage_l2_sketched(rows, sketch_rows=sketch_rows, seed=seed).values
    return leverage_l2(rows).values


def scores_2pl(
    fixed: Union[AbilityParameters, ItemParameters, np.ndarray],
    sketched: bool = False,
    seed: int = 0,
    sketch_rows: int = 64,
) -> np.ndarray:
    """``sqrt(l_j) + 1/N`` for the rows ``(theta_j, -1)`` (or ``(a_i, b_i)``).

    Examples
    --------
    >>> scores_2pl(AbilityParameters(theta=[0.5, 0.5, 0.5, 0.5])).round(12).tolist()
    [0.75, 0.75, 0.75, 0.75]
    """
    rows = _fixed_rows(fixed)
    lev = _leverage(rows, sketched, seed, sketch_rows)
    return np.sqrt(lev) + 1.0 / rows.shape[0]


def _sensitivities(
    basis_norms: np.ndarray, passed: np.ndarray, mu0: float, mu1: float, E: float
) -> np.ndarray:
    m_pass = int(np.sum(passed))
    m_fail = passed.size - m_pass
    if m_pass == 0 or m_fail == 0:
        raise DegenerateLabelsError(
            f"design needs both label classes, got {m_fail} failed and {m_pass} passed rows"
        )
    fail = FAIL_CONSTANT * mu1**2 * (basis_norms + 1.0 / m_fail)
    return np.where(passed, PASS_CONSTANT * E * (1.0 + mu0) / m_pass, fail)


def scores_3pl(
    design: SignedDesign,
    mu: Union[MuEstimate, Tuple[float, float]],
    E: float,
    rounded: bool = True,
) -> np.ndarray:
    """Sensitivity upper bounds of a 3PL design, split by label class.

    Parameters
    ----------
    design : SignedDesign
        Needs both failed and passed rows.
    mu : MuEstimate or (mu0, mu1)
    E : float
        ``max ln(1 / c)`` over the guessing values in play.
    rounded : bool
        Round every score up to a power of two.

    Returns
    -------
    array of shape (N,)
        ``42.5 mu1^2 (||U_i|| + 1/m')`` for failed rows, ``U`` an orthonormal basis
        of the design's column space, and ``3.5 E (1 + mu0) / m''`` for passed rows.
    """
    mu0, mu1 = (mu.mu0, mu.mu1) if isinstance(mu, MuEstimate) else mu
    if not (np.isfinite(mu0) and np.isfinite(mu1)) or min(mu0, mu1) < 1:
        raise InvalidArgumentError(f"mu estimates must be finite and at least 1, got {mu0}, {mu1}")
    if not np.isfinite(E) or E <= 0:
        raise InvalidArgumentError(f"E must be finite and positive, got {E}")
    basis_norms = np.sqrt(leverage_l2(design.rows).values)
    scores = _sensitivities(basis_norms, design.passed, mu0, mu1, E)
    return round_up_pow2(scores) if rounded else scores


def plugin_mu(
    X: np.ndarray,
    policy: Union[MuPolicy, str] = MuPolicy.AUTO,
    value: Optional[float] = None,
    optimum: Optional[Sequence[float]] = None,
) -> Tuple[float, float, bool]:
    """``mu_0`` and ``mu_1`` estimates of ``X`` clamped into ``[1, N]``.

    The third entry tells whether an infinite (or undefined) estimate was clamped.
    """
    policy = MuPolicy(policy)
    size = X.shape[0]
    if policy is MuPolicy.FIXED:
        if value is None:
            raise InvalidArgumentError("a fixed mu policy needs a value")
        raw = (float(value), float(value))
    else:
        exact = policy is MuPolicy.EXACT or (
            policy is MuPolicy.AUTO and size <= EXACT_SIZE_LIMIT
        )
        method = MuMethod.EXACT_SWEEP if exact else MuMethod.HEURISTIC
        try:
            estimate = mu_estimate(X, method, optimum)
            raw = (estimate.mu0, estimate.mu1)
        except UndefinedComplexityError:
            raw = (np.inf, np.inf)
    clamped = not (np.isfinite(raw[0]) and np.isfinite(raw[1]))
    mu0, mu1 = (float(min(max(1.0, r), size)) for r in raw)
    return mu0, mu1, clamped


def _shared_scores_3pl(
    Y: ResponseMatrix,
    items: ItemParameters,
    abilities: AbilityParameters,
    options: CoresetOptions,
    seed: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-row maximum of the rounded 3PL scores over every design of the fixed dimension."""
    if options.direction is CoresetDirection.EXAMINEES:
        labels = Y.entries
        rows = abilities.beta
        optima = items.alpha
    else:
        labels = Y.entries.T
        rows = items.alpha
        optima = abilities.beta

    basis_norms = np.sqrt(_leverage(rows, options.sketched, seed, options.sketch_rows))
    shared = np.zeros(rows.shape[0])
    skipped = clamped = 0
    for design, y in enumerate(labels):
        passed = y == 1
        if passed.all() or not passed.any():
            skipped += 1
            continue
        X = -y[:, None].astype(np.float64) * rows
        mu0, mu1, was_clamped = plugin_mu(X, options.mu_policy, options.mu_value, optima[design])
        clamped += int(was_clamped)

        mu = max(mu0, mu1)
        if options.direction is CoresetDirection.EXAMINEES:
            c_low = items.c[design]
        else:
            c_low = float(np.min(items.c))
        c_grid = round_guessing(np.array([c_low]), mu, options.epsilon, options.kappa)
        E = float(-np.log(c_grid[0]))
        scores = round_up_pow2(_sensitivities(basis_norms, passed, mu0, mu1, E))
        np.maximum(shared, scores, out=shared)

    if skipped == labels.shape[0]:
        raise DegenerateLabelsError("every design holds a single label class")
    if skipped:
        logger.debug("%d of %d designs hold a single label class", skipped, labels.shape[0])
    if clamped:
        logger.warning("%d designs have unbounded mu, clamped to the design size", clamped)

    unit_labels = labels.T
    forced = np.flatnonzero(np.all(unit_labels == 1, axis=1) | np.all(unit_labels == -1, axis=1))
    if forced.size:
        logger.warning(
            "%d %s answer with a single label class and are included outright",
            forced.size, options.direction.value,
        )
    return shared, forced


def _reapply(
    coreset: WeightedCoreset,
    rows: np.ndarray,
    k: int,
    seed: int,
    round_index: int,
    options: CoresetOptions,
) -> WeightedCoreset:
    """Draw a coreset of the weighted support, rows scaled by their weight."""
    weights = np.bincount(coreset.indices, weights=coreset.u, minlength=coreset.population)
    support = np.flatnonzero(weights > 0)
    if support.size <= k:
        logger.info(
            "round %d: support of %d rows is not above k = %d, stopping",
            round_index, support.size, k,
        )
        return coreset

    w = weights[support]
    scaled = rows[support] * w[:, None]
    scores = np.sqrt(leverage_l2(scaled).values) + 1.0 / support.size
    inner = sample_weighted(scores, k, derive_seed(seed, round_index), options.method, weights=w)
    return WeightedCoreset(
        indices=support[inner.indices],
        u=inner.u,
        scores=inner.scores,
        total=inner.total,
        population=coreset.population,
        seed=coreset.seed,
        method=inner.method,
        forced=coreset.forced,
    )


def build_coreset(
    Y: ResponseMatrix,
    items: ItemParameters,
    abilities: AbilityParameters,
    model: Union[ModelKind, str],
    k: int,
    options: Optional[CoresetOptions] = None,
    seed: int = 0,
) -> WeightedCoreset:
    """One weighted coreset of examinees (or items) shared by all conditional solves.

    Parameters
    ----------
    Y : ResponseMatrix
    items, abilities : ItemParameters, AbilityParameters
        Current estimates. Compressing examinees scores the ability rows; compressing
        items scores the item rows. 3PL also reads the guessing values and uses the
        other block to anchor the mu heuristic.
    model : ModelKind
    k : int
        Sample size, at most the size of the compressed dimension. ``k`` equal to it
        keeps every row with weight 1.
    options : CoresetOptions, optional
    seed : int

    Returns
    -------
    WeightedCoreset
        For 3PL, units answering with a single label class are carried in
        ``forced`` with weight 1.
    """
    model = ModelKind.parse(model)
    options = CoresetOptions() if options is None else options
    if Y.m != items.m or Y.n != abilities.n:
        raise InvalidArgumentError(
            f"responses are {Y.m} x {Y.n} but got {items.m} items and {abilities.n} abilities"
        )
    examinees = options.direction is CoresetDirection.EXAMINEES
    population = Y.n if examinees else Y.m
    if not 1 <= k <= population:
        raise InvalidArgumentError(
            f"k must lie in [1, {population}] for {options.direction.value}, got {k}"
        )
    if k == population:
        logger.info("k equals the number of %s, keeping every row", options.direction.value)
        return sample_weighted(
            np.ones(population), k, seed, SamplingMethod.WITHOUT_REPLACEMENT
        )
    if options.rounds > 1:
        logger.warning(
            "rounds = %d re-applies 2PL-style scores to weighted rows (experimental)",
            options.rounds,
        )

    started = perf_counter()
    rows = abilities.beta if examinees else items.alpha
    if model.has_guessing:
        scores, forced = _shared_scores_3pl(Y, items, abilities, options, seed)
    else:
        scores = scores_2pl(rows, options.sketched, seed, options.sketch_rows)
        forced = np.zeros(0, dtype=np.int64)

    if forced.size == population:
        logger.warning(
            "every one of the %d %s is included outright", population, options.direction.value
        )
        empty = np.zeros(0)
        return WeightedCoreset(
            indices=empty, u=empty, scores=empty, total=0.0, population=population,
            seed=seed, method=options.method, forced=forced,
        )

    coreset = sample_weighted(scores, k, seed, options.method, forced=forced)
    for round_index in range(2, options.rounds + 1):
        coreset = _reapply(coreset, rows, k, seed, round_index, options)

    logger.info(
        "%s coreset: %d of %d %s, S = %.6g, %d forced, %.3fs",
        model.value, coreset.k, population, options.direction.value, coreset.total,
        coreset.forced.size, perf_counter() - started,
    )
    return coreset


def eta_grid(bounds: Optional[Bounds] = None, per_axis: int = 10) -> np.ndarray:
    """Evenly spaced ``(a, b)`` points over the item box, ``per_axis**2`` of them."""
    bounds = Bounds() if bounds is None else bounds
    a = np.linspace(bounds.a_min, bounds.a_max, per_axis)
    b = np.linspace(bounds.b_min, bounds.b_max, per_axis)
    return np.stack(np.meshgrid(a, b, indexing="ij"), axis=-1).reshape(-1, 2)


def coreset_deviation(
    design: SignedDesign,
    coreset: WeightedCoreset,
    etas: np.ndarray,
    c: Optional[float] = None,
) -> float:
    """Largest ``|f_u(K eta) - f(X eta)| / f(X eta)`` over the rows of ``etas``.

    ``design`` is the full design whose rows are the coreset's population.
    """
    if coreset.population != len(design):
        raise InvalidArgumentError(
            f"coreset drawn from {coreset.population} rows, design has {len(design)}"
        )
    etas = np.asarray(etas, dtype=np.float64).reshape(-1, 2)
    c_rows = design.c if c is None else np.full(len(design), c)
    losses = signed_losses(design.rows @ etas.T, design.passed[:, None], c_rows[:, None])
    full = design.weights @ losses
    core = (design.weights * coreset.row_weights()) @ losses
    return float(np.max(np.abs(core - full) / full))


def quality_bound(
    objective: float, mu: float, epsilon: float, sigma1: float, model: Union[ModelKind, str]
) -> float:
    """Upper bound on ``||eta_opt - eta_core||_1`` for a ``(1 + epsilon)`` coreset.

    ``(1 + mu)^tau (2 + 3 epsilon) f(X eta_opt) / sigma1``, with ``tau = 2`` for 3PL
    and 1 otherwise; infinite when ``sigma1`` is zero.
    """
    tau = 2 if ModelKind.parse(model).has_guessing else 1
    if sigma1 <= 0:
        return float(np.inf)
    return float((1.0 + mu) ** tau * (2.0 + 3.0 * epsilon) * objective / sigma1)

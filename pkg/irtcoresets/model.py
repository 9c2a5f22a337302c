"""
IRT probability model and losses

The item characteristic curve is ``p = c + (1 - c) / (1 + exp(-a * theta + b))``.
Every conditional problem is written over *signed rows*: with the other parameter
block fixed, a response ``Y_ij`` contributes a row ``x = -Y_ij * fixed`` and a
loss evaluated at ``z = x . eta``. Failed responses use the shifted logistic loss
``g`` and passed responses the bounded sigmoid loss ``h``; for ``c = 0`` both
reduce to ``ln(1 + e^z)``.

Examples
--------
code ::
    import numpy as np
    from irtcoresets import ResponseMatrix, ItemParameters, AbilityParameters, full_nll

    Y = ResponseMatrix(np.array([[1, -1], [-1, 1]]))
    items = ItemParameters(a=[1.0, 1.0], b=[0.0, 0.0])
    full_nll(Y, items, AbilityParameters(theta=[0.0, 0.0]))   # 4 * ln 2
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from enum import IntEnum
from typing import Optional
from typing import Sequence
from typing import Union

import numpy as np
from scipy.special import expit
from scipy.special import log_expit

from irtcoresets.exceptions import DimensionMismatchError
from irtcoresets.exceptions import InvalidArgumentError

ArrayLike = Union[float, Sequence[float], np.ndarray]

C_UPPER = 0.5
A_MAX = 5.0
B_LIMIT = 6.0


class ModelKind(str, Enum):
    ONE_PL = "1pl"
    TWO_PL = "2pl"
    THREE_PL = "3pl"

    @classmethod
    def parse(cls, value: Union[str, ModelKind]) -> ModelKind:
        if isinstance(value, ModelKind):
            return value
        try:
            return cls(str(value).lower())
        except ValueError as exc:
            raise InvalidArgumentError(
                f"unknown model {value!r}, expected one of 1pl, 2pl, 3pl"
            ) from exc

    @property
    def has_guessing(self) -> bool:
        return self is ModelKind.THREE_PL


class LossKind(IntEnum):
    """Per-row loss selector; the value is the response label."""

    FAIL = -1
    PASS = 1


class Orientation(str, Enum):
    BY_ITEM = "item"
    BY_EXAMINEE = "examinee"


def _frozen(values: ArrayLike, name: str, dtype: type = np.float64) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True).reshape(-1)
    if dtype is np.float64 and not np.all(np.isfinite(array)):
        raise InvalidArgumentError(f"{name} must be finite")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class ResponseMatrix:
    """The m x n label matrix with entries in {-1, +1}, one row per item.

    Parameters
    ----------
    entries : array of shape (m, n)
        Labels, +1 for a passed item and -1 for a failed one.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        entries = np.array(self.entries, copy=True)
        if entries.ndim != 2 or entries.shape[0] < 1 or entries.shape[1] < 1:
            raise InvalidArgumentError(
                f"responses must be a non-empty 2-d matrix, got shape {entries.shape}"
            )
        if not np.all((entries == 1) | (entries == -1)):
            raise InvalidArgumentError("responses must only contain -1 and +1")
        entries = np.ascontiguousarray(entries, dtype=np.int8)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_labels(cls, labels: np.ndarray, encoding: str = "pm1") -> ResponseMatrix:
        """Build from raw labels, mapping 0 to -1 when ``encoding="01"``."""
        labels = np.asarray(labels)
        if encoding == "pm1":
            return cls(labels)
        if encoding == "01":
            if not np.all((labels == 0) | (labels == 1)):
                raise InvalidArgumentError("labels encoded as 01 must only contain 0 and 1")
            return cls(np.where(labels == 1, 1, -1))
        raise InvalidArgumentError(f"unknown label encoding {encoding!r}, expected pm1 or 01")

    @property
    def m(self) -> int:
        return int(self.entries.shape[0])

    @property
    def n(self) -> int:
        return int(self.entries.shape[1])

    def packbits(self) -> np.ndarray:
        """One bit per entry (1 for a pass), rows padded to whole bytes."""
        return np.packbits(self.entries == 1, axis=1)

    @classmethod
    def unpackbits(cls, packed: np.ndarray, n: int) -> ResponseMatrix:
        bits = np.unpackbits(np.asarray(packed, dtype=np.uint8), axis=1, count=n)
        return cls(np.where(bits == 1, 1, -1))


@dataclass(frozen=True)
class ItemParameters:
    """Discrimination ``a``, difficulty ``b`` and guessing ``c`` per item.

    ``c`` defaults to zeros (2PL). Values must lie in the model domain ``0 < a <= 5``,
    ``-6 <= b <= 6`` and ``0 <= c < 0.5``; the estimation boxes of
    :class:`irtcoresets.solver.Bounds` sit inside it.
    """

    a: np.ndarray
    b: np.ndarray
    c: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        a = _frozen(self.a, "a")
        b = _frozen(self.b, "b")
        c = _frozen(np.zeros_like(a) if self.c is None else self.c, "c")
        if not (a.shape == b.shape == c.shape) or a.size < 1:
            raise DimensionMismatchError(
                f"a, b and c must have the same non-zero length, got {a.size}, {b.size}, {c.size}"
            )
        if np.any((a <= 0) | (a > A_MAX)):
            raise InvalidArgumentError(f"discrimination a must lie in (0, {A_MAX:g}]")
        if np.any(np.abs(b) > B_LIMIT):
            raise InvalidArgumentError(f"difficulty b must lie in [-{B_LIMIT:g}, {B_LIMIT:g}]")
        if np.any((c < 0) | (c >= C_UPPER)):
            raise InvalidArgumentError("guessing c must lie in [0, 0.5)")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def m(self) -> int:
        return int(self.a.size)

    @property
    def alpha(self) -> np.ndarray:
        """Rows ``(a_i, b_i)`` as an m x 2 matrix."""
        return np.column_stack([self.a, self.b])

    def to_threshold(self) -> np.ndarray:
        """Difficulties ``b / a`` for the ``-a (theta - b')`` exponent convention."""
        return self.b / self.a


@dataclass(frozen=True)
class AbilityParameters:
    """Ability ``theta`` per examinee."""

    theta: np.ndarray

    def __post_init__(self) -> None:
        theta = _frozen(self.theta, "theta")
        if theta.size < 1:
            raise InvalidArgumentError("at least one ability is required")
        object.__setattr__(self, "theta", theta)

    @property
    def n(self) -> int:
        return int(self.theta.size)

    @property
    def beta(self) -> np.ndarray:
        """Rows ``(theta_j, -1)`` as an n x 2 matrix."""
        return np.column_stack([self.theta, -np.ones_like(self.theta)])


@dataclass(frozen=True)
class SignedDesign:
    """Signed rows of one conditional problem.

    Parameters
    ----------
    rows : array of shape (N, 2)
        ``x = -Y * fixed`` for each response entering the problem.
    labels : array of shape (N,)
        +1 (Pass, h-loss) or -1 (Fail, g-loss) per row.
    weights : array of shape (N,), optional
        Nonnegative row weights, ones by default.
    c : array of shape (N,) or float, optional
        Guessing value attached to each row's loss, zero by default.
    """

    rows: np.ndarray
    labels: np.ndarray
    weights: Optional[np.ndarray] = None
    c: Optional[Union[np.ndarray, float]] = None

    def __post_init__(self) -> None:
        rows = np.array(self.rows, dtype=np.float64, copy=True)
        if rows.ndim != 2 or rows.shape[1] != 2:
            raise InvalidArgumentError(f"design rows must be N x 2, got shape {rows.shape}")
        size = rows.shape[0]
        labels = np.array(self.labels, copy=True).reshape(-1)
        weights = np.ones(size) if self.weights is None else self.weights
        c = np.zeros(size) if self.c is None else np.broadcast_to(self.c, (size,))
        weights = _frozen(weights, "weights")
        c = _frozen(c, "c")

        if not (labels.size == weights.size == c.size == size):
            raise DimensionMismatchError("rows, labels, weights and c must have equal length")
        if not np.all((labels == 1) | (labels == -1)):
            raise InvalidArgumentError("labels must only contain -1 and +1")
        if not np.all(np.isfinite(rows)):
            raise InvalidArgumentError("design rows must be finite")
        if np.any(weights < 0) or not np.any(weights > 0):
            raise InvalidArgumentError("weights must be nonnegative with at least one positive")
        if np.any((c < 0) | (c >= C_UPPER)):
            raise InvalidArgumentError("row guessing values must lie in [0, 0.5)")

        rows.setflags(write=False)
        labels = labels.astype(np.int8)
        labels.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "c", c)

    def __len__(self) -> int:
        return int(self.rows.shape[0])

    @property
    def passed(self) -> np.ndarray:
        return self.labels == LossKind.PASS

    def reweighted(self, weights: np.ndarray) -> SignedDesign:
        return SignedDesign(self.rows, self.labels, weights, self.c)


def fail_loss(z: ArrayLike, c: ArrayLike = 0.0) -> np.ndarray:
    """``g(z) = ln(1 + e^z) - ln(1 - c)``."""
    return np.logaddexp(0.0, z) - np.log1p(-np.asarray(c, dtype=np.float64))


def pass_loss(z: ArrayLike, c: ArrayLike = 0.0) -> np.ndarray:
    """``h(z) = -ln(c + (1 - c) sigmoid(-z))``, evaluated in log space."""
    c = np.asarray(c, dtype=np.float64)
    with np.errstate(divide="ignore"):
        log_c = np.log(c)
    return -np.logaddexp(log_c, np.log1p(-c) + log_expit(-np.asarray(z, dtype=np.float64)))


def signed_losses(z: np.ndarray, passed: np.ndarray, c: ArrayLike) -> np.ndarray:
    c = np.broadcast_to(np.asarray(c, dtype=np.float64), np.shape(z))
    return np.where(passed, pass_loss(z, c), fail_loss(z, c))


@dataclass(frozen=True)
class LossDerivatives:
    """First and second derivatives of the pointwise losses in ``z`` and ``c``."""

    dz: np.ndarray
    dzz: np.ndarray
    dc: np.ndarray
    dcc: np.ndarray
    dzc: np.ndarray


def loss_derivatives(z: np.ndarray, passed: np.ndarray, c: ArrayLike) -> LossDerivatives:
    z = np.asarray(z, dtype=np.float64)
    c = np.broadcast_to(np.asarray(c, dtype=np.float64), z.shape)
    s = expit(z)
    t = expit(-z)

    q = np.maximum(c + (1.0 - c) * t, np.finfo(np.float64).tiny)
    r = (1.0 - c) * t / q
    one_minus_c = 1.0 - c

    dz = np.where(passed, r * s, s)
    dzz = np.where(passed, r * s * ((t - s) + r * s), s * t)
    dc = np.where(passed, -s / q, 1.0 / one_minus_c)
    dcc = np.where(passed, (s / q) ** 2, 1.0 / one_minus_c**2)
    dzc = np.where(passed, -s * t / q**2, 0.0)
    return LossDerivatives(dz=dz, dzz=dzz, dc=dc, dcc=dcc, dzc=dzc)


def _check_finite(*values: ArrayLike) -> None:
    for value in values:
        if not np.all(np.isfinite(value)):
            raise InvalidArgumentError("arguments must be finite")


def icc_probability(a: ArrayLike, b: ArrayLike, c: ArrayLike, theta: ArrayLike) -> np.ndarray:
    """Probability of passing an item, ``c + (1 - c) / (1 + exp(-a theta + b))``.

    Arguments broadcast against each other.

    Examples
    --------
    >>> float(icc_probability(1.0, 0.0, 0.0, 0.0))
    0.5
    """
    _check_finite(a, b, c, theta)
    a, b, c, theta = (np.asarray(v, dtype=np.float64) for v in (a, b, c, theta))
    if np.any(a <= 0):
        raise InvalidArgumentError("discrimination a must be strictly positive")
    if np.any((c < 0) | (c >= C_UPPER)):
        raise InvalidArgumentError("guessing c must lie in [0, 0.5)")
    return c + (1.0 - c) * expit(a * theta - b)


def pointwise_loss(kind: Union[LossKind, int], c: float, z: ArrayLike) -> np.ndarray:
    """Loss of one signed row: ``g`` for a Fail row, ``h`` for a Pass row.

    Examples
    --------
    >>> round(float(pointwise_loss(LossKind.FAIL, 0.25, 0.0)), 6)
    0.980829
    """
    _check_finite(c, z)
    if not 0.0 <= c < C_UPPER:
        raise InvalidArgumentError(f"guessing c must lie in [0, 0.5), got {c}")
    if LossKind(kind) is LossKind.PASS:
        return pass_loss(z, c)
    return fail_loss(z, c)


def conditional_nll(design: SignedDesign, eta: ArrayLike, c: Optional[float] = None) -> float:
    """Weighted sum of pointwise losses at ``z = rows @ eta``.

    ``c`` overrides every row's guessing value (the 3PL item step).
    """
    eta = np.asarray(eta, dtype=np.float64).reshape(2)
    z = design.rows @ eta
    c_rows = design.c if c is None else np.full(len(design), c)
    return float(np.sum(design.weights * signed_losses(z, design.passed, c_rows)))


def _check_dimensions(
    Y: ResponseMatrix, items: ItemParameters, abilities: AbilityParameters
) -> None:
    if Y.m != items.m or Y.n != abilities.n:
        raise DimensionMismatchError(
            f"responses are {Y.m} x {Y.n} but got {items.m} items and {abilities.n} abilities"
        )


def loss_matrix(
    Y: ResponseMatrix, items: ItemParameters, abilities: AbilityParameters
) -> np.ndarray:
    """The m x n matrix of pointwise losses."""
    _check_dimensions(Y, items, abilities)
    linear = items.a[:, None] * abilities.theta[None, :] - items.b[:, None]
    z = -Y.entries * linear
    return signed_losses(z, Y.entries == 1, items.c[:, None])


def full_nll(Y: ResponseMatrix, items: ItemParameters, abilities: AbilityParameters) -> float:
    """Negative log-likelihood of the whole response matrix."""
    return float(np.sum(loss_matrix(Y, items, abilities)))


def build_signed_design(
    Y: ResponseMatrix,
    fixed: Union[ItemParameters, AbilityParameters],
    orientation: Union[Orientation, str],
    index: int,
    c: float = 0.0,
    weights: Optional[np.ndarray] = None,
) -> SignedDesign:
    """Signed design for one item (rows over examinees) or one examinee (rows over items).

    Parameters
    ----------
    Y : ResponseMatrix
    fixed : ItemParameters or AbilityParameters
        Abilities when building an item's design, items when building an examinee's.
    orientation : Orientation
    index : int
        The item (``BY_ITEM``) or examinee (``BY_EXAMINEE``) index.
    c : float
        The item's guessing value for a ``BY_ITEM`` design.
    weights : array, optional
        Row weights, ones by default.
    """
    orientation = Orientation(orientation)
    if orientation is Orientation.BY_ITEM:
        if not isinstance(fixed, AbilityParameters):
            raise InvalidArgumentError("an item design is built from fixed abilities")
        if fixed.n != Y.n:
            raise DimensionMismatchError(f"expected {Y.n} abilities, got {fixed.n}")
        if not 0 <= index < Y.m:
            raise InvalidArgumentError(f"item index {index} out of range [0, {Y.m})")
        labels = Y.entries[index]
        return SignedDesign(-labels[:, None] * fixed.beta, labels, weights, c)

    if not isinstance(fixed, ItemParameters):
        raise InvalidArgumentError("an examinee design is built from fixed items")
    if fixed.m != Y.m:
        raise DimensionMismatchError(f"expected {Y.m} items, got {fixed.m}")
    if not 0 <= index < Y.n:
        raise InvalidArgumentError(f"examinee index {index} out of range [0, {Y.n})")
    labels = Y.entries[:, index]
    return SignedDesign(-labels[:, None] * fixed.alpha, labels, weights, fixed.c)

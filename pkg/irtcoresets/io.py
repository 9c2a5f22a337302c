"""
Reading and writing responses and parameter tables

Responses come in two layouts:

* ``long``: one row per response with columns ``item,examinee,y``;
* ``dense``: a header ``item,<examinee ids>`` and one row of labels per item.

Labels are ``-1/+1`` (``pm1``) or ``0/1`` (``01``). Floats are written with the
shortest repr that round trips and read back with ``float_precision="round_trip"``.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Tuple
from typing import Union

import numpy as np
import pandas as pd

from irtcoresets.exceptions import InvalidArgumentError
from irtcoresets.model import AbilityParameters
from irtcoresets.model import ItemParameters
from irtcoresets.model import ResponseMatrix

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

LONG_COLUMNS = ("item", "examinee", "y")


def _read_csv(path: PathLike) -> pd.DataFrame:
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"no such file: {path}") from exc
    except pd.errors.EmptyDataError as exc:
        raise InvalidArgumentError(f"{path}: file is empty") from exc


def long_to_dense(df: pd.DataFrame) -> pd.DataFrame:
    """Pivot ``item,examinee,y`` rows into one row per item.

    >>> df = pd.DataFrame({"item": [0, 0, 1, 1], "examinee": [0, 1, 0, 1], "y": [1, -1, -1, 1]})
    >>> long_to_dense(df).to_numpy().tolist()
    [[1, -1], [-1, 1]]
    """
    if df.duplicated(subset=["item", "examinee"]).any():
        raise InvalidArgumentError("each (item, examinee) pair must appear once")
    dense = df.pivot(index="item", columns="examinee", values="y")
    if dense.isna().to_numpy().any():
        missing = int(dense.isna().to_numpy().sum())
        raise InvalidArgumentError(f"response matrix is incomplete, {missing} entries missing")
    return dense.astype(np.int64)


def read_responses(
    path: PathLike, labels: str = "pm1", layout: str = "auto"
) -> ResponseMatrix:
    """Read a response CSV.

    Parameters
    ----------
    path : str or Path
    labels : {"pm1", "01"}
        Label encoding; ``01`` maps 0 to -1.
    layout : {"auto", "long", "dense"}
        ``auto`` picks ``long`` when the columns are exactly ``item,examinee,y``.

    Returns
    -------
    ResponseMatrix
        Items and examinees ordered by their ids.
    """
    df = _read_csv(path)
    if layout == "auto":
        layout = "long" if tuple(df.columns) == LONG_COLUMNS else "dense"

    if layout == "long":
        missing = set(LONG_COLUMNS) - set(df.columns)
        if missing:
            raise InvalidArgumentError(f"{path}: missing columns {sorted(missing)}")
        dense = long_to_dense(df)
    elif layout == "dense":
        dense = df.set_index(df.columns[0])
    else:
        raise InvalidArgumentError(f"unknown layout {layout!r}, expected auto, long or dense")

    try:
        Y = ResponseMatrix.from_labels(dense.to_numpy(), encoding=labels)
    except InvalidArgumentError as exc:
        raise InvalidArgumentError(f"{path}: {exc}") from exc
    logger.info("read %d x %d responses from %s", Y.m, Y.n, path)
    return Y


def responses_to_frame(Y: ResponseMatrix, layout: str = "long") -> pd.DataFrame:
    if layout == "dense":
        dense = pd.DataFrame(Y.entries, columns=np.arange(Y.n))
        dense.insert(0, "item", np.arange(Y.m))
        return dense
    if layout != "long":
        raise InvalidArgumentError(f"unknown layout {layout!r}, expected long or dense")
    item, examinee = np.indices(Y.entries.shape)
    return pd.DataFrame(
        {"item": item.ravel(), "examinee": examinee.ravel(), "y": Y.entries.ravel()}
    )


def write_responses(Y: ResponseMatrix, path: PathLike, layout: str = "long") -> None:
    responses_to_frame(Y, layout).to_csv(path, index=False)
    logger.info("wrote responses to %s", path)


def parameters_to_frames(
    items: ItemParameters, abilities: AbilityParameters
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Item table ``item,a,b,c,threshold`` and ability table ``examinee,theta``."""
    item_frame = pd.DataFrame(
        {
            "item": np.arange(items.m),
            "a": items.a,
            "b": items.b,
            "c": items.c,
            "threshold": items.to_threshold(),
        }
    )
    ability_frame = pd.DataFrame({"examinee": np.arange(abilities.n), "theta": abilities.theta})
    return item_frame, ability_frame


def write_parameters(
    items: ItemParameters, abilities: AbilityParameters, directory: PathLike
) -> Tuple[Path, Path]:
    """Write ``items.csv`` and ``abilities.csv`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    item_frame, ability_frame = parameters_to_frames(items, abilities)
    item_path, ability_path = directory / "items.csv", directory / "abilities.csv"
    item_frame.to_csv(item_path, index=False)
    ability_frame.to_csv(ability_path, index=False)
    logger.info("wrote parameters to %s and %s", item_path, ability_path)
    return item_path, ability_path


def read_parameters(directory: PathLike) -> Tuple[ItemParameters, AbilityParameters]:
    directory = Path(directory)
    item_frame = _read_csv(directory / "items.csv").sort_values("item")
    ability_frame = _read_csv(directory / "abilities.csv").sort_values("examinee")
    c = item_frame["c"].to_numpy() if "c" in item_frame else None
    items = ItemParameters(a=item_frame["a"].to_numpy(), b=item_frame["b"].to_numpy(), c=c)
    return items, AbilityParameters(theta=ability_frame["theta"].to_numpy())

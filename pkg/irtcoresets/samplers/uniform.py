from __future__ import annotations

import numpy as np

from irtcoresets.exceptions import InvalidArgumentError
from irtcoresets.samplers.weighted import SamplingMethod
from irtcoresets.samplers.weighted import WeightedCoreset
from irtcoresets.samplers.weighted import sample_weighted


def uniform_coreset(n: int, k: int, seed: int = 0, replace: bool = True) -> WeightedCoreset:
    """``k`` uniform draws out of ``n``, each weighted ``n / k``.

    Without replacement the rows are distinct; ``k = n`` then keeps every row with
    weight 1.

    Examples
    --------
    >>> uniform_coreset(10, 4, seed=0).u.tolist()
    [2.5, 2.5, 2.5, 2.5]
    """
    if not 1 <= k <= n:
        raise InvalidArgumentError(f"k must lie in [1, {n}], got {k}")
    if replace:
        method = SamplingMethod.IID_ALIAS
    elif k < n:
        method = SamplingMethod.CHAO_RESERVOIR
    else:
        method = SamplingMethod.WITHOUT_REPLACEMENT
    return sample_weighted(np.ones(n), k, seed, method)

from __future__ import annotations

import os
from typing import Optional

import numpy as np

from irtcoresets.exceptions import ConfigError


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the substream ``(seed, *keys)``.

    Substreams derived from distinct keys are independent, so work split by
    index draws the same numbers whatever the number of workers.

    Examples
    --------
    >>> a = make_rng(7, 3).random()
    >>> b = make_rng(7, 3).random()
    >>> a == b
    True
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *keys: int) -> int:
    """A 63-bit seed for the substream ``(seed, *keys)``."""
    state = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in keys)])
    return int(state.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def irt_threads(requested: Optional[int] = None) -> int:
    """Number of workers allowed, capped by the ``IRT_THREADS`` environment variable."""
    cap_raw = os.environ.get("IRT_THREADS")
    cap = os.cpu_count() or 1
    if cap_raw:
        try:
            cap = int(cap_raw)
        except ValueError as exc:
            raise ConfigError(f"IRT_THREADS must be an integer, got {cap_raw!r}") from exc
        if cap < 1:
            raise ConfigError(f"IRT_THREADS must be positive, got {cap}")

    if requested is None:
        return cap
    return max(1, min(requested, cap))

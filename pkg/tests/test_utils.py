import os

import pytest

from irtcoresets import utils
from irtcoresets.exceptions import ConfigError


def test_make_rng_is_reproducible():
    assert utils.make_rng(7, 3).random() == utils.make_rng(7, 3).random()


@pytest.mark.parametrize("keys", [(4,), (3, 1), ()])
def test_make_rng_substreams_differ(keys):
    assert utils.make_rng(7, 3).random() != utils.make_rng(7, *keys).random()


def test_derive_seed_range():
    seeds = {utils.derive_seed(0, r) for r in range(50)}
    assert len(seeds) == 50
    assert all(0 <= seed < 2**63 for seed in seeds)
    assert utils.derive_seed(0, 1) == utils.derive_seed(0, 1)


@pytest.mark.parametrize(
    "cap,requested,expected",
    [
        ("2", 8, 2),
        ("2", None, 2),
        ("6", 3, 3),
        ("4", 0, 1),
    ],
)
def test_irt_threads_respects_cap(monkeypatch, cap, requested, expected):
    monkeypatch.setenv("IRT_THREADS", cap)
    assert utils.irt_threads(requested) == expected


def test_irt_threads_defaults_to_cpu_count(monkeypatch):
    monkeypatch.delenv("IRT_THREADS", raising=False)
    assert utils.irt_threads() == (os.cpu_count() or 1)


@pytest.mark.parametrize("cap", ["many", "0", "-3"])
def test_irt_threads_rejects_invalid_cap(monkeypatch, cap):
    monkeypatch.setenv("IRT_THREADS", cap)
    with pytest.raises(ConfigError):
        utils.irt_threads()

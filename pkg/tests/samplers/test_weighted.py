import numpy as np
import pytest
from numpy.testing import assert_allclose
from numpy.testing import assert_array_equal

from irtcoresets import WeightedCoreset
from irtcoresets import sample_weighted
from irtcoresets.exceptions import EmptyCoresetError
from irtcoresets.exceptions import InvalidArgumentError
from irtcoresets.samplers.weighted import AliasTable
from irtcoresets.samplers.weighted import SamplingMethod
from irtcoresets.samplers.weighted import _Inclusion
from irtcoresets.samplers.weighted import chao_reservoir
from irtcoresets.samplers.weighted import inclusion_probabilities


@pytest.fixture
def scores():
    return np.array([4.0, 1.0, 0.0, 2.0, 1.0])


# SAMPLING


def test_alias_weights_follow_scores(scores):
    coreset = sample_weighted(scores, k=3, seed=1, method="alias")
    assert coreset.total == 8.0
    assert_allclose(coreset.u, 8.0 / (3 * scores[coreset.indices]))
    assert_allclose(coreset.probabilities, scores[coreset.indices] / 8.0)


def test_reservoir_weights_invert_inclusion_probabilities(scores):
    # c = 1/2 puts rows 0 and 3 in every reservoir of three
    pi = np.array([1.0, 0.5, 0.0, 1.0, 0.5])
    assert_allclose(inclusion_probabilities(scores, 3), pi)
    coreset = sample_weighted(scores, k=3, seed=1, method="reservoir")
    assert coreset.total == 8.0
    assert_allclose(coreset.u, 1.0 / pi[coreset.indices])


def test_input_weights_scale_coreset_weights(scores):
    w = np.array([1.0, 2.0, 1.0, 3.0, 0.5])
    coreset = sample_weighted(scores, k=4, seed=2, weights=w)
    assert_allclose(coreset.u, 8.0 * w[coreset.indices] / (4 * scores[coreset.indices]))


def test_alias_frequencies(scores):
    draws = AliasTable(scores).draw(np.random.default_rng(0), 200_000)
    frequencies = np.bincount(draws, minlength=scores.size) / draws.size
    assert_allclose(frequencies, scores / scores.sum(), atol=0.005)
    assert frequencies[2] == 0.0


def test_zero_scores_are_never_sampled(scores):
    for seed in range(20):
        assert 2 not in sample_weighted(scores, k=10, seed=seed).indices


def test_same_seed_same_sample(scores):
    first = sample_weighted(scores, k=6, seed=9)
    second = sample_weighted(scores, k=6, seed=9)
    assert_array_equal(first.indices, second.indices)


def test_reservoir_draws_distinct_rows(scores):
    indices = chao_reservoir(scores, 3, np.random.default_rng(4))
    assert len(set(indices.tolist())) == 3
    assert 2 not in indices


def test_reservoir_inclusion_is_proportional_to_scores():
    scores = np.array([4.0, 1.0, 2.0, 1.0, 3.0, 2.0, 1.0, 2.0])
    counts = np.zeros(scores.size)
    for seed in range(4000):
        counts[chao_reservoir(scores, 3, np.random.default_rng(seed))] += 1
    assert_allclose(counts / 4000, 3 * scores / scores.sum(), atol=0.03)


def test_reservoir_always_keeps_overweight_rows():
    # 50 is more than half of the total, so row 49 belongs in every pair
    scores = np.array([1.0] * 49 + [50.0])
    for seed in range(50):
        assert 49 in chao_reservoir(scores, 2, np.random.default_rng(seed))


def test_inclusion_caps_overweight_rows():
    inclusion = _Inclusion(2)
    for index, score in enumerate([1.0, 1.0, 6.0, 1.0, 1.0]):
        inclusion.add(index, score)
    assert inclusion.probability(6.0) == 1.0
    assert inclusion.probability(1.0) == pytest.approx(0.25)
    assert [index for _, index in inclusion.heavy] == [2]


def test_reservoir_needs_enough_positive_scores(scores):
    with pytest.raises(InvalidArgumentError):
        chao_reservoir(scores, 5, np.random.default_rng(0))


def test_exhaustive_keeps_every_row():
    coreset = sample_weighted(np.ones(6), k=6, seed=0, method=SamplingMethod.WITHOUT_REPLACEMENT)
    assert_array_equal(coreset.indices, np.arange(6))
    assert_array_equal(coreset.u, np.ones(6))


def test_exhaustive_needs_matching_k():
    with pytest.raises(InvalidArgumentError, match="exhaustive"):
        sample_weighted(np.ones(6), k=4, seed=0, method="exhaustive")


def test_forced_rows_are_carried_outside_the_sample(scores):
    coreset = sample_weighted(scores, k=5, seed=3, forced=[0])
    assert 0 not in coreset.indices
    assert coreset.total == 4.0
    assert coreset.row_weights()[0] == 1.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"scores": np.array([1.0, -1.0]), "k": 1},
        {"scores": np.array([1.0, np.nan]), "k": 1},
        {"scores": np.zeros(3), "k": 1},
        {"scores": np.ones(3), "k": 0},
    ],
)
def test_sampling_validation(kwargs):
    with pytest.raises(InvalidArgumentError):
        sample_weighted(seed=0, **kwargs)


def test_weighted_sum_is_unbiased():
    rng = np.random.default_rng(5)
    values = rng.normal(size=40) ** 2
    scores = values + rng.uniform(0.2, 1.0, size=40)
    estimates = [
        values @ sample_weighted(scores, k=10, seed=seed).row_weights() for seed in range(2000)
    ]
    assert np.mean(estimates) == pytest.approx(values.sum(), rel=0.03)


def test_reservoir_weighted_sum_is_unbiased_with_an_overweight_row():
    scores = np.array([50.0] + [1.0] * 99)
    values = np.arange(1.0, 101.0)
    estimates = np.array(
        [
            values @ sample_weighted(scores, k=10, seed=seed, method="reservoir").row_weights()
            for seed in range(2000)
        ]
    )
    standard_error = estimates.std(ddof=1) / np.sqrt(estimates.size)
    assert abs(estimates.mean() - values.sum()) <= 3 * standard_error


def test_inclusion_probabilities_sum_to_k():
    scores = np.array([50.0] + [1.0] * 99 + [0.0])
    pi = inclusion_probabilities(scores, 10)
    assert pi.sum() == pytest.approx(10.0)
    assert pi[0] == 1.0
    assert pi[-1] == 0.0
    assert_allclose(pi[1:-1], 9.0 / 99.0)


# CORESET OBJECT


def test_row_weights_fold_duplicates():
    coreset = WeightedCoreset(
        indices=[1, 1, 3], u=[2.0, 2.0, 0.5], scores=[1.0, 1.0, 4.0], total=6.0, population=5,
        forced=[4],
    )
    assert_array_equal(coreset.row_weights(), [0.0, 4.0, 0.0, 0.5, 1.0])
    assert_array_equal(coreset.support(), [1, 3, 4])
    assert coreset.k == 3


def test_coreset_is_read_only():
    coreset = WeightedCoreset(indices=[0], u=[1.0], scores=[1.0], total=1.0, population=1)
    with pytest.raises(ValueError):
        coreset.u[0] = 2.0


@pytest.mark.parametrize(
    "kwargs,error",
    [
        ({"indices": [0, 1], "u": [1.0], "scores": [1.0]}, InvalidArgumentError),
        ({"indices": [], "u": [], "scores": []}, EmptyCoresetError),
        ({"indices": [5], "u": [1.0], "scores": [1.0]}, InvalidArgumentError),
        ({"indices": [0], "u": [0.0], "scores": [1.0]}, InvalidArgumentError),
        ({"indices": [0], "u": [np.inf], "scores": [1.0]}, InvalidArgumentError),
    ],
)
def test_coreset_validation(kwargs, error):
    with pytest.raises(error):
        WeightedCoreset(total=1.0, population=3, **kwargs)


def test_csv_round_trip(scores, tmp_path):
    coreset = sample_weighted(scores, k=4, seed=7, forced=[2])
    path = tmp_path / "coreset.csv"
    coreset.to_csv(path)
    loaded = WeightedCoreset.from_csv(path, population=5)
    assert_array_equal(loaded.indices, coreset.indices)
    assert_array_equal(loaded.u, coreset.u)
    assert_array_equal(loaded.forced, [2])
    assert loaded.total == pytest.approx(coreset.total)
    assert_array_equal(loaded.row_weights(), coreset.row_weights())


def test_csv_round_trip_keeps_total_under_input_weights(scores, tmp_path):
    w = np.array([3.0, 2.0, 1.0, 0.5, 4.0])
    coreset = sample_weighted(scores, k=3, seed=2, method="reservoir", weights=w)
    path = tmp_path / "coreset.csv"
    coreset.to_csv(path)
    loaded = WeightedCoreset.from_csv(path, population=5)
    assert loaded.total == coreset.total
    assert_allclose(loaded.probabilities, coreset.probabilities)
    assert_array_equal(loaded.u, coreset.u)


def test_from_csv_without_total_assumes_unit_weights(tmp_path):
    path = tmp_path / "coreset.csv"
    path.write_text("index,u,score\n0,2.0,1.0\n1,1.0,2.0\n")
    assert WeightedCoreset.from_csv(path, population=3).total == 4.0


def test_from_csv_needs_columns(tmp_path):
    path = tmp_path / "coreset.csv"
    path.write_text("index,u\n0,1.0\n")
    with pytest.raises(InvalidArgumentError, match="score"):
        WeightedCoreset.from_csv(path, population=3)

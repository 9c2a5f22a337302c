import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose
from numpy.testing import assert_array_equal
from scipy.optimize import minimize

from irtcoresets import AbilityParameters
from irtcoresets import Bounds
from irtcoresets import CoresetContext
from irtcoresets import CoresetSchedule
from irtcoresets import FitConfig
from irtcoresets import ItemParameters
from irtcoresets import ResponseMatrix
from irtcoresets import SignedDesign
from irtcoresets import alternate_fit
from irtcoresets import build_signed_design
from irtcoresets import conditional_gradient
from irtcoresets import conditional_nll
from irtcoresets import fit_conditional
from irtcoresets import full_nll
from irtcoresets import generate_synthetic
from irtcoresets import standardize
from irtcoresets import uniform_coreset
from irtcoresets.exceptions import DegenerateScaleError
from irtcoresets.exceptions import DimensionMismatchError
from irtcoresets.exceptions import InvalidArgumentError
from irtcoresets.model import ModelKind
from irtcoresets.solver import initial_estimates


@pytest.fixture(scope="module")
def synthetic():
    return generate_synthetic(n=300, m=10, model="2pl", seed=3)


@pytest.fixture(scope="module")
def fitted(synthetic):
    Y, _, _ = synthetic
    return alternate_fit(Y, "2pl", FitConfig(max_main_iterations=30))


@pytest.fixture
def item_design():
    rng = np.random.default_rng(21)
    theta = rng.normal(size=10_000)
    p = 1.0 / (1.0 + np.exp(-2.75 * theta))
    labels = np.where(rng.random(theta.size) < p, 1, -1)
    Y = ResponseMatrix(labels[None, :])
    return build_signed_design(Y, AbilityParameters(theta=theta), "item", 0)


# BOUNDS AND CONFIG


@pytest.mark.parametrize(
    "kwargs",
    [
        {"a_min": 0.0},
        {"a_min": 2.0, "a_max": 1.0},
        {"b_min": 1.0, "b_max": -1.0},
        {"c_max": 0.5},
        {"c_min": 0.3, "c_max": 0.2},
        {"a_max": 6.0},
        {"b_min": -7.0},
    ],
)
def test_bounds_validation(kwargs):
    with pytest.raises(InvalidArgumentError):
        Bounds(**kwargs)


def test_item_box_per_model():
    bounds = Bounds()
    lower, upper = bounds.item_box(ModelKind.ONE_PL)
    assert_array_equal(lower, [1.0, -6.0])
    assert_array_equal(upper, [1.0, 6.0])
    lower, upper = bounds.item_box("3pl")
    assert_array_equal(lower, [1e-3, -6.0, 0.0])
    assert_array_equal(upper, [5.0, 6.0, 0.499])


@pytest.mark.parametrize(
    "kwargs",
    [{"max_main_iterations": 0}, {"inner_max_steps": 0}, {"inner_tolerance": 0.0}],
)
def test_fit_config_validation(kwargs):
    with pytest.raises(InvalidArgumentError):
        FitConfig(**kwargs)


# CONDITIONAL PROBLEMS


def test_gradient_at_zero_is_half_the_weighted_row_sum():
    rng = np.random.default_rng(1)
    rows = rng.normal(size=(12, 2))
    weights = rng.uniform(0.5, 2.0, 12)
    design = SignedDesign(rows, np.where(rng.random(12) < 0.5, 1, -1), weights)
    assert_allclose(conditional_gradient(design, [0.0, 0.0]), 0.5 * weights @ rows)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    rows = rng.normal(size=(30, 2))
    labels = np.where(rng.random(30) < 0.5, 1, -1)
    design = SignedDesign(rows, labels, rng.uniform(0.5, 2.0, 30), c=0.15)
    eta = np.array([0.8, -0.4])
    h = 1e-5

    grad = conditional_gradient(design, eta, c=0.15, wrt_c=True)
    for axis in range(2):
        step = np.zeros(2)
        step[axis] = h
        plus, minus = conditional_nll(design, eta + step), conditional_nll(design, eta - step)
        assert grad[axis] == pytest.approx((plus - minus) / (2 * h), rel=1e-6, abs=1e-7)
    numeric_c = (
        conditional_nll(design, eta, c=0.15 + h) - conditional_nll(design, eta, c=0.15 - h)
    ) / (2 * h)
    assert grad[2] == pytest.approx(numeric_c, rel=1e-6, abs=1e-7)


def test_fit_conditional_matches_bounded_reference(item_design):
    fit = fit_conditional(item_design, "2pl")
    reference = minimize(
        lambda eta: conditional_nll(item_design, eta),
        x0=[1.0, 0.0],
        jac=lambda eta: conditional_gradient(item_design, eta),
        method="L-BFGS-B",
        bounds=[(1e-3, 5.0), (-6.0, 6.0)],
    )
    assert fit.converged
    assert fit.objective <= reference.fun * (1 + 1e-8)
    assert fit.objective == pytest.approx(conditional_nll(item_design, fit.params), rel=1e-12)


def test_fit_conditional_recovers_item(item_design):
    fit = fit_conditional(item_design, "2pl")
    a, b = fit.params
    assert abs(a - 2.75) < 0.25
    assert abs(b) < 0.15


def test_all_passed_item_pins_difficulty():
    theta = np.linspace(-2.0, 2.0, 50)
    Y = ResponseMatrix(np.ones((1, 50), dtype=int))
    design = build_signed_design(Y, AbilityParameters(theta=theta), "item", 0)
    fit = fit_conditional(design, "2pl")
    assert fit.params[1] == pytest.approx(-6.0)


def test_examinee_fit_pins_second_coordinate(synthetic):
    Y, items, _ = synthetic
    design = build_signed_design(Y, items, "examinee", 4)
    fit = fit_conditional(design, "2pl", orientation="examinee", init=[0.3])
    assert fit.params[1] == -1.0
    assert -6.0 <= fit.params[0] <= 6.0
    assert fit.objective <= conditional_nll(design, [0.3, -1.0])


def test_fit_conditional_rejects_wrong_initial_point(item_design):
    with pytest.raises(InvalidArgumentError):
        fit_conditional(item_design, "2pl", init=[1.0, 0.0, 0.1])


def test_three_parameter_fit_improves_on_start():
    Y, items, abilities = generate_synthetic(n=800, m=1, model="3pl", seed=9)
    design = build_signed_design(Y, abilities, "item", 0, c=0.1)
    fit = fit_conditional(design, "3pl")
    a, b, c = fit.params
    assert 0.0 <= c <= 0.499
    assert fit.objective <= conditional_nll(design, [1.0, 0.0], c=0.1)
    assert fit.objective == pytest.approx(conditional_nll(design, [a, b], c=c), rel=1e-12)


# STANDARDIZATION


def test_standardize_preserves_linear_terms(synthetic):
    Y, items, abilities = synthetic
    shifted = AbilityParameters(theta=0.8 * abilities.theta + 0.3)
    new_items, new_abilities = standardize(items, shifted)

    before = items.a[:, None] * shifted.theta[None, :] - items.b[:, None]
    after = new_items.a[:, None] * new_abilities.theta[None, :] - new_items.b[:, None]
    assert_allclose(after, before, atol=1e-10)
    assert full_nll(Y, new_items, new_abilities) == pytest.approx(
        full_nll(Y, items, shifted), rel=1e-10
    )
    assert new_abilities.theta.mean() == pytest.approx(0.0, abs=1e-12)
    assert new_abilities.theta.std() == pytest.approx(1.0)


def test_standardize_clips_items_leaving_the_domain(caplog):
    items = ItemParameters(a=[4.0, 1.0], b=[0.0, 0.0])
    abilities = AbilityParameters(theta=[-2.0, 0.0, 2.0])
    with caplog.at_level(logging.WARNING, logger="irtcoresets.solver"):
        new_items, _ = standardize(items, abilities)
    scale = np.sqrt(8.0 / 3.0)
    assert_allclose(new_items.a, [5.0, scale])
    assert "1 standardized items" in caplog.text


def test_standardize_is_idempotent(synthetic):
    _, items, abilities = synthetic
    once = standardize(items, abilities)
    twice = standardize(*once)
    assert_allclose(twice[1].theta, once[1].theta, atol=1e-12)
    assert_allclose(twice[0].a, once[0].a, rtol=1e-12)
    assert_allclose(twice[0].b, once[0].b, atol=1e-12)


def test_standardize_without_scaling_keeps_discrimination():
    items, abilities = standardize(
        ItemParameters(a=[1.0, 1.0], b=[0.5, -0.5]), AbilityParameters(theta=[0.0, 4.0]), False
    )
    assert_array_equal(items.a, [1.0, 1.0])
    assert_array_equal(abilities.theta, [-2.0, 2.0])
    assert_array_equal(items.b, [-1.5, -2.5])


def test_standardize_rejects_constant_abilities():
    with pytest.raises(DegenerateScaleError):
        standardize(ItemParameters(a=[1.0], b=[0.0]), AbilityParameters(theta=[0.5, 0.5, 0.5]))


def test_initial_estimates(synthetic):
    Y, _, _ = synthetic
    items, abilities = initial_estimates(Y, "3pl")
    assert abilities.theta.mean() == pytest.approx(0.0, abs=1e-12)
    assert_array_equal(items.a, np.ones(Y.m))
    assert_array_equal(items.c, np.full(Y.m, 0.1))
    failure = np.mean(Y.entries == -1, axis=1)
    with np.errstate(divide="ignore"):
        expected = np.clip(np.log(failure / (1 - failure)), -6.0, 6.0)
    assert_allclose(items.b, expected)


# ALTERNATING FIT


def test_trace_is_monotone(fitted):
    _, _, trace = fitted
    assert trace.is_monotone()
    assert trace.standardized
    assert trace.final_objective < trace.objectives[0]

    frame = trace.to_frame()
    assert list(frame.columns) == [
        "iteration",
        "objective",
        "sampling_seconds",
        "step_2a_seconds",
        "step_2b_seconds",
        "inner_steps",
    ]
    assert len(frame) == trace.iterations + 1


def test_final_objective_is_full_nll(synthetic, fitted):
    Y, _, _ = synthetic
    items, abilities, trace = fitted
    assert full_nll(Y, items, abilities) == pytest.approx(trace.final_objective, rel=1e-9)


def test_fit_is_at_least_as_good_as_truth(synthetic, fitted):
    Y, true_items, true_abilities = synthetic
    items, abilities, _ = fitted
    assert full_nll(Y, items, abilities) <= 1.005 * full_nll(Y, true_items, true_abilities)


def test_fitted_abilities_are_standardized(fitted):
    _, abilities, _ = fitted
    assert abilities.theta.mean() == pytest.approx(0.0, abs=1e-10)
    assert abilities.theta.std() == pytest.approx(1.0)


def test_toy_trace_is_monotone():
    Y = ResponseMatrix(
        np.array([[1, 1, -1, 1], [1, -1, -1, 1], [-1, 1, 1, -1], [1, -1, 1, -1]])
    )
    _, _, trace = alternate_fit(Y, "2pl", FitConfig(max_main_iterations=10))
    assert trace.is_monotone()


def test_one_parameter_fit_keeps_unit_discrimination(synthetic):
    Y, _, _ = synthetic
    items, abilities, trace = alternate_fit(Y, "1pl", FitConfig(max_main_iterations=10))
    assert_array_equal(items.a, np.ones(Y.m))
    assert abilities.theta.mean() == pytest.approx(0.0, abs=1e-10)
    assert trace.is_monotone()


def test_three_parameter_fit_respects_guessing_bounds():
    Y, _, _ = generate_synthetic(n=200, m=6, model="3pl", seed=4)
    items, _, trace = alternate_fit(Y, "3pl", FitConfig(max_main_iterations=8))
    assert np.all((items.c >= 0.0) & (items.c <= 0.499))
    assert trace.is_monotone()


# CORESET CONTEXT


def test_trivial_coreset_reproduces_full_fit(synthetic):
    Y, _, _ = synthetic
    config = FitConfig(max_main_iterations=5)
    full = alternate_fit(Y, "2pl", config)
    context = CoresetContext(Y, uniform_coreset(Y.n, Y.n, replace=False))
    core = alternate_fit(context, "2pl", config)

    assert core.trace.on_coreset
    assert core.trace.objectives == full.trace.objectives
    assert_allclose(core.items.a, full.items.a)
    assert_allclose(core.abilities.theta, full.abilities.theta)


def test_coreset_fit_estimates_every_examinee(synthetic):
    Y, _, _ = synthetic
    coreset = uniform_coreset(Y.n, 100, seed=7)
    items, abilities, trace = alternate_fit(
        CoresetContext(Y, coreset), "2pl", FitConfig(max_main_iterations=10)
    )
    assert abilities.n == Y.n
    assert np.all(np.isfinite(abilities.theta))
    assert trace.is_monotone()


def test_coreset_over_items(synthetic):
    Y, _, _ = synthetic
    context = CoresetContext(Y, uniform_coreset(Y.m, 5, seed=1, replace=False), "items")
    item_w, ex_w = context.weights()
    assert_array_equal(ex_w, np.ones(Y.n))
    assert np.count_nonzero(item_w) == 5

    items, _, trace = alternate_fit(context, "2pl", FitConfig(max_main_iterations=5))
    assert items.m == Y.m
    assert trace.is_monotone()


def test_coreset_population_must_match(synthetic):
    Y, _, _ = synthetic
    with pytest.raises(DimensionMismatchError):
        CoresetContext(Y, uniform_coreset(Y.n + 1, 10))


# CORESET SCHEDULE


class Recorder:
    """Draw function that remembers what it was called with."""

    def __init__(self, population, k, replace=True):
        self.population = population
        self.k = k
        self.replace = replace
        self.calls = []

    def __call__(self, items, abilities, iteration):
        self.calls.append((iteration, items, abilities))
        return uniform_coreset(self.population, self.k, seed=iteration, replace=self.replace)


def test_schedule_redraws_after_the_ability_step(synthetic):
    Y, _, _ = synthetic
    draw = Recorder(Y.n, 100)
    config = FitConfig(max_main_iterations=4, relative_tolerance=0.0)
    items, abilities, trace = alternate_fit(CoresetSchedule(Y, draw), "2pl", config)

    assert [call[0] for call in draw.calls] == [1, 2, 3, 4]
    _, start = initial_estimates(Y, "2pl")
    assert not np.allclose(draw.calls[0][2].theta, start.theta)
    assert not np.allclose(draw.calls[0][2].theta, draw.calls[1][2].theta)
    assert trace.on_coreset
    assert len(trace.sampling_seconds) == trace.iterations == 4
    assert trace.coreset.seed == 4


def test_schedule_traces_the_full_objective(synthetic):
    Y, _, _ = synthetic
    schedule = CoresetSchedule(Y, Recorder(Y.n, 3))
    items, abilities, trace = alternate_fit(schedule, "2pl", FitConfig(max_main_iterations=6))
    assert trace.is_monotone()
    assert full_nll(Y, items, abilities) == pytest.approx(trace.final_objective, rel=1e-9)


def test_schedule_with_every_examinee_matches_full_fit(synthetic):
    Y, _, _ = synthetic
    config = FitConfig(max_main_iterations=5, relative_tolerance=0.0)
    full = alternate_fit(Y, "2pl", config)
    core = alternate_fit(CoresetSchedule(Y, Recorder(Y.n, Y.n, replace=False)), "2pl", config)
    assert_allclose(core.trace.objectives, full.trace.objectives, rtol=1e-8)
    assert_allclose(core.items.b, full.items.b, atol=1e-6)


def test_schedule_over_items_draws_before_the_ability_step(synthetic):
    Y, _, _ = synthetic
    draw = Recorder(Y.m, 5, replace=False)
    schedule = CoresetSchedule(Y, draw, "items")
    _, _, trace = alternate_fit(schedule, "2pl", FitConfig(max_main_iterations=3))
    assert_allclose(draw.calls[0][1].a, 1.0)
    assert trace.coreset.population == Y.m
    assert trace.is_monotone()


def test_schedule_population_must_match(synthetic):
    Y, _, _ = synthetic
    with pytest.raises(DimensionMismatchError):
        alternate_fit(CoresetSchedule(Y, Recorder(Y.n + 1, 10)), "2pl")

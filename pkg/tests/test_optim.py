import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import minimize

from irtcoresets.optim import SignedBatch
from irtcoresets.optim import projected_newton


@pytest.fixture
def batch():
    rng = np.random.default_rng(11)
    base = rng.normal(size=(40, 2))
    signs = np.where(rng.random((3, 40)) < 0.5, 1.0, -1.0)
    weights = rng.uniform(0.5, 2.0, 40)
    return SignedBatch(base=base, signs=signs, weights=weights, c_fixed=np.zeros((1, 1)))


def _single(batch, p):
    return SignedBatch(batch.base, batch.signs[p : p + 1], batch.weights, batch.c_fixed)


def test_matches_scipy_on_logistic_problems(batch):
    lower, upper = np.full(2, -50.0), np.full(2, 50.0)
    result = projected_newton(batch, np.zeros((3, 2)), lower, upper)

    assert result.converged.all()
    for p in range(3):
        problem = _single(batch, p)

        def objective(v):
            return problem.objective(v[None, :], np.array([0]))[0]

        reference = minimize(objective, np.zeros(2), method="BFGS")
        assert result.objective[p] <= reference.fun + 1e-8
        assert_allclose(result.x[p], reference.x, atol=1e-4)


def test_problems_are_solved_independently(batch):
    lower, upper = np.full(2, -50.0), np.full(2, 50.0)
    joint = projected_newton(batch, np.zeros((3, 2)), lower, upper)
    for p in range(3):
        alone = projected_newton(_single(batch, p), np.zeros((1, 2)), lower, upper)
        assert_allclose(joint.x[p], alone.x[0], atol=1e-6)


def test_objective_never_increases(batch):
    result = projected_newton(batch, np.ones((3, 2)), [-50.0, -50.0], [50.0, 50.0])
    assert np.all(result.objective <= result.initial_objective)


def test_pinned_coordinate_stays_fixed(batch):
    result = projected_newton(batch, np.zeros((3, 2)), [-6.0, -1.0], [6.0, -1.0])
    assert np.all(result.x[:, 1] == -1.0)
    assert np.all(np.abs(result.x[:, 0]) <= 6.0)


def test_start_is_projected_onto_the_box(batch):
    result = projected_newton(batch, np.full((3, 2), 10.0), [-1.0, -1.0], [1.0, 1.0])
    assert np.all(result.x >= -1.0) and np.all(result.x <= 1.0)


def test_separable_problem_runs_into_the_box():
    base = np.array([[1.0, 0.0], [2.0, 0.5], [0.5, -0.2]])
    # every row fails: the loss decreases without bound along -x
    signs = np.ones((1, 3))
    batch = SignedBatch(base, signs, np.ones(3), np.zeros((1, 1)))
    result = projected_newton(batch, np.zeros((1, 2)), [-6.0, -6.0], [6.0, 6.0])
    assert result.x[0, 0] == pytest.approx(-6.0)


def test_derivatives_match_finite_differences():
    rng = np.random.default_rng(5)
    base = rng.normal(size=(25, 2))
    signs = np.where(rng.random((2, 25)) < 0.5, 1.0, -1.0)
    batch = SignedBatch(base, signs, rng.uniform(0.5, 1.5, 25), np.zeros((1, 1)))
    x = np.array([[0.7, -0.3, 0.2], [1.4, 0.5, 0.35]])
    idx = np.arange(2)
    h = 1e-6

    grad, hess = batch.derivatives(x, idx)
    for coordinate in range(3):
        step = np.zeros(3)
        step[coordinate] = h
        plus = batch.objective(x + step, idx)
        minus = batch.objective(x - step, idx)
        assert_allclose(grad[:, coordinate], (plus - minus) / (2 * h), rtol=1e-5, atol=1e-6)

        grad_plus, _ = batch.derivatives(x + step, idx)
        grad_minus, _ = batch.derivatives(x - step, idx)
        assert_allclose(
            hess[:, :, coordinate], (grad_plus - grad_minus) / (2 * h), rtol=1e-5, atol=1e-6
        )


def test_guessing_coordinate_respects_its_bounds():
    rng = np.random.default_rng(8)
    theta = rng.normal(size=200)
    base = np.column_stack([theta, -np.ones(200)])
    p = 0.2 + 0.8 / (1.0 + np.exp(-(1.5 * theta - 0.3)))
    labels = np.where(rng.random(200) < p, 1.0, -1.0)
    batch = SignedBatch(base, -labels[None, :], np.ones(200), np.zeros((1, 1)))

    lower, upper = np.array([1e-3, -6.0, 0.0]), np.array([5.0, 6.0, 0.499])
    result = projected_newton(batch, np.array([[1.0, 0.0, 0.1]]), lower, upper)
    assert np.all(result.x >= lower) and np.all(result.x <= upper)
    assert result.objective[0] <= result.initial_objective[0]

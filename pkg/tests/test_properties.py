"""Statistical and structural properties of sampling and fitting, fast enough for every run."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from irtcoresets import FitConfig
from irtcoresets import ResponseMatrix
from irtcoresets import alternate_fit
from irtcoresets import build_coreset
from irtcoresets import build_signed_design
from irtcoresets import coreset_deviation
from irtcoresets import eta_grid
from irtcoresets import fit_conditional
from irtcoresets import generate_synthetic
from irtcoresets import mu_exact_2d
from irtcoresets import quality_bound
from irtcoresets import sigma1_min_2d
from irtcoresets.model import conditional_nll
from irtcoresets.model import signed_losses
from irtcoresets.samplers.scores import subsample


@pytest.fixture(scope="module")
def instance():
    return generate_synthetic(n=2000, m=20, seed=53)


def flipped(Y, rows, rng):
    entries = np.array(Y.entries)
    signs = rng.choice([-1, 1], size=(len(rows), Y.n))
    entries[rows] = entries[rows] * signs
    return ResponseMatrix(entries)


# SAMPLING


def test_sampling_is_unbiased_at_a_fixed_point():
    Y, items, abilities = generate_synthetic(n=2000, m=10, seed=51)
    design = build_signed_design(Y, abilities, "item", index=0)
    losses = signed_losses(design.rows @ np.array([1.0, 0.0]), design.passed, design.c)
    full = losses.sum()

    for method in ("coreset", "uniform", "distance", "l1lev", "lewis"):
        estimates = np.array(
            [
                subsample(method, Y, items, abilities, "2pl", k=50, seed=seed).row_weights()
                @ losses
                for seed in range(1000)
            ]
        )
        standard_error = estimates.std(ddof=1) / np.sqrt(estimates.size)
        assert abs(estimates.mean() - full) <= 3 * standard_error, method


def test_deviation_shrinks_with_k(instance):
    Y, items, abilities = instance
    design = build_signed_design(Y, abilities, "item", index=0)
    rng = np.random.default_rng(0)
    etas = np.column_stack([rng.uniform(0.2, 5.0, 100), rng.uniform(-3.0, 3.0, 100)])

    medians = []
    for k in (50, 100, 200, 400):
        deviations = [
            coreset_deviation(design, build_coreset(Y, items, abilities, "2pl", k, seed=s), etas)
            for s in range(20)
        ]
        medians.append(np.median(deviations))
    assert np.all(np.diff(medians) <= 0), medians


# REUSE ACROSS LABELINGS


def test_coreset_is_valid_for_the_negated_design(instance):
    Y, items, abilities = instance
    coreset = build_coreset(Y, items, abilities, "2pl", k=200, seed=1)
    negated = ResponseMatrix(-np.asarray(Y.entries))
    etas = eta_grid()
    for index in range(3):
        design = build_signed_design(Y, abilities, "item", index=index)
        flipped_design = build_signed_design(negated, abilities, "item", index=index)
        assert_allclose(flipped_design.rows, -design.rows)
        assert coreset_deviation(flipped_design, coreset, etas) == pytest.approx(
            coreset_deviation(design, coreset, -etas), rel=1e-12
        )


def test_one_coreset_serves_every_labeling(instance):
    Y, items, abilities = instance
    shared = build_coreset(Y, items, abilities, "2pl", k=200, seed=2)
    rng = np.random.default_rng(3)
    etas = eta_grid()

    reused, fresh = [], []
    for variant in range(10):
        Y_variant = flipped(Y, [0], rng)
        design = build_signed_design(Y_variant, abilities, "item", index=0)
        own = build_coreset(Y_variant, items, abilities, "2pl", k=200, seed=100 + variant)
        reused.append(coreset_deviation(design, shared, etas))
        fresh.append(coreset_deviation(design, own, etas))
    assert np.median(reused) <= 2 * np.median(fresh)
    assert np.median(fresh) <= 2 * np.median(reused)


# COMPLEXITY


@pytest.mark.parametrize("orientation", ["item", "examinee"])
def test_label_classes_are_balanced_by_mu(orientation):
    checked = 0
    for seed in range(20):
        Y, items, abilities = generate_synthetic(n=30, m=6, seed=seed)
        fixed = abilities if orientation == "item" else items
        count = Y.m if orientation == "item" else Y.n
        for index in range(count):
            design = build_signed_design(Y, fixed, orientation, index=index)
            failed = int(np.sum(~design.passed))
            passed = int(np.sum(design.passed))
            if failed == 0 or passed == 0:
                continue
            mu0 = mu_exact_2d(design.rows).mu0
            assert passed / (2 * mu0) <= failed <= 2 * mu0 * passed
            checked += 1
    assert checked > 0


def test_quality_bound_holds_on_small_instances():
    violations = []
    etas = eta_grid()
    for seed in range(10):
        Y, items, abilities = generate_synthetic(n=30, m=4, seed=seed)
        coreset = build_coreset(Y, items, abilities, "2pl", k=20, seed=seed)
        for index in range(Y.m):
            design = build_signed_design(Y, abilities, "item", index=index)
            weighted = build_signed_design(
                Y, abilities, "item", index=index, weights=coreset.row_weights()
            )
            best = fit_conditional(design, "2pl")
            core = fit_conditional(weighted, "2pl")
            bound = quality_bound(
                best.objective,
                mu_exact_2d(design.rows).mu,
                coreset_deviation(design, coreset, etas),
                sigma1_min_2d(design.rows),
                "2pl",
            )
            distance = float(np.abs(best.params - core.params).sum())
            if distance > bound:
                violations.append((seed, index, distance, bound))
    assert violations == []


# FITTING


def test_alternating_fit_is_monotone_on_small_instances():
    for seed in range(20):
        Y, _, _ = generate_synthetic(n=40, m=6, seed=seed)
        fit = alternate_fit(Y, "2pl", FitConfig(max_main_iterations=15))
        assert fit.trace.is_monotone(), seed


def test_refit_error_is_bounded_by_the_measured_deviation():
    Y, items, abilities = generate_synthetic(n=1500, m=5, seed=52)
    etas = eta_grid()
    for seed in range(20):
        coreset = build_coreset(Y, items, abilities, "2pl", k=200, seed=seed)
        for index in range(Y.m):
            design = build_signed_design(Y, abilities, "item", index=index)
            weighted = build_signed_design(
                Y, abilities, "item", index=index, weights=coreset.row_weights()
            )
            deviation = coreset_deviation(design, coreset, etas)
            full_fit = fit_conditional(design, "2pl")
            core_fit = fit_conditional(weighted, "2pl")
            refit = conditional_nll(design, core_fit.params)
            assert refit <= (1 + 4 * deviation) * full_fit.objective * (1 + 1e-9)

"""Statistical primitives, checked against independent oracles: hand-applied
step-up rules, closed-form entropies, and calibration simulations."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgecert import stats

RNG = np.random.default_rng


# ---------------------------------------------------------------------------
# Benjamini-Hochberg


def rejected(p_values, level):
    return set(np.nonzero(stats.bh_fdr(np.asarray(p_values, float), level))[0])


def test_bh_all_ones_rejects_nothing():
    assert rejected([1.0, 1.0, 1.0], 0.05) == set()


def test_bh_single_test_is_plain_threshold():
    assert rejected([0.001], 0.05) == {0}
    assert rejected([0.06], 0.05) == set()


def test_bh_hand_applied_step_up():
    # sorted p = [.01, .02, .30, .90]; thresholds k/m*.05 = [.0125, .025,
    # .0375, .05].  Largest k with p_(k) <= threshold is k=2, so the two
    # smallest p-values are rejected.
    assert rejected([0.01, 0.02, 0.30, 0.90], 0.05) == {0, 1}


def test_bh_empty_input():
    assert rejected([], 0.05) == set()


def test_bh_step_up_rescues_borderline_p():
    # p=[.01, .024]: .024 > .0125 alone, but k=2 threshold is .05*2/2=.05,
    # and .024 <= .05, so the step-up rule rejects both.
    assert rejected([0.01, 0.024], 0.05) == {0, 1}


@given(st.lists(st.floats(min_value=0.0, max_value=1.0), max_size=40),
       st.floats(min_value=0.01, max_value=0.5),
       st.floats(min_value=0.01, max_value=0.5))
def test_bh_monotone_in_level(ps, lo, hi):
    lo, hi = min(lo, hi), max(lo, hi)
    assert rejected(ps, lo) <= rejected(ps, hi)


@given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1,
                max_size=40), st.floats(min_value=0.01, max_value=0.5))
def test_bh_rejections_below_level_cutoff(ps, level):
    # every rejected p is <= level (the k/m factor never exceeds 1) and every
    # p below level/m is always rejected
    rej = rejected(ps, level)
    m = len(ps)
    for idx in rej:
        assert ps[idx] <= level
    for idx, p in enumerate(ps):
        if p <= level / m:
            assert idx in rej


# ---------------------------------------------------------------------------
# HSIC


def test_hsic_constant_input_degenerate():
    rng = RNG(0)
    y = rng.normal(size=200)
    res = stats.hsic_test(np.ones(200), y, method="gamma")
    assert res.statistic == 0.0
    assert res.p_value == 1.0
    assert stats.hsic_test(y, np.full(200, 3.3)).p_value == 1.0


def test_hsic_statistic_symmetry():
    rng = RNG(1)
    x = rng.normal(size=300)
    y = x ** 2 + rng.normal(size=300)
    a = stats.hsic_statistic(x, y)
    b = stats.hsic_statistic(y, x)
    assert abs(a - b) < 1e-12


def test_hsic_deterministic_given_seed():
    rng = RNG(2)
    x = rng.normal(size=250)
    y = rng.normal(size=250)
    r1 = stats.hsic_test(x, y, permutations=300, seed=7)
    r2 = stats.hsic_test(x, y, permutations=300, seed=7)
    assert (r1.statistic, r1.p_value) == (r2.statistic, r2.p_value)
    r3 = stats.hsic_test(x, y, permutations=300, seed=8)
    assert r1.statistic == r3.statistic         # statistic ignores the seed


def test_hsic_length_mismatch_rejected():
    with pytest.raises(ValueError):
        stats.hsic_test(np.zeros(10), np.zeros(11))


def test_hsic_detects_identity_dependence():
    # y = x at N=500: rejection rate > 0.99 over 100 seeds
    hits = 0
    for seed in range(100):
        x = RNG(seed).uniform(size=500)
        res = stats.hsic_test(x, x, method="gamma", seed=seed)
        hits += res.p_value < 0.01
    assert hits >= 99


def test_hsic_permutation_calibration_small():
    # quick calibration check (the full N=500 x 1000-seed version is an
    # acceptance criterion): under independence the permutation p-value is
    # valid, P(p <= a) <= a + 1/B
    n, b, seeds, alpha = 120, 200, 200, 0.05
    hits = 0
    for seed in range(seeds):
        rng = RNG(10_000 + seed)
        res = stats.hsic_test(rng.normal(size=n), rng.normal(size=n),
                              permutations=b, seed=seed)
        hits += res.p_value <= alpha
    rate = hits / seeds
    assert rate <= alpha + 1.0 / b + 0.035      # binomial slack at 200 seeds
    assert rate >= 0.005                        # and not degenerate


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=20, deadline=None)
def test_hsic_pvalue_in_unit_interval(seed):
    rng = RNG(seed)
    x = rng.normal(size=60)
    y = rng.normal(size=60) + (seed % 3) * x
    res = stats.hsic_test(x, y, permutations=200, seed=seed, method="gamma")
    assert 0.0 <= res.p_value <= 1.0
    assert res.statistic >= 0.0


def test_hsic_subsamples_above_max_n():
    rng = RNG(3)
    x = rng.normal(size=2000)
    y = rng.normal(size=2000)
    res = stats.hsic_test(x, y, max_n=512, method="gamma")
    assert res.n_used == 512
    again = stats.hsic_test(x, y, max_n=512, method="gamma")
    assert res.statistic == again.statistic     # deterministic subsample


# ---------------------------------------------------------------------------
# Shapiro-Wilk gate


def test_shapiro_calibrated_under_normality():
    hits = 0
    for seed in range(1000):
        p = stats.shapiro_wilk(RNG(seed).normal(size=1000))
        hits += p < 0.05
    assert 0.03 <= hits / 1000 <= 0.07


def test_shapiro_rejects_exponential():
    for seed in range(20):
        p = stats.shapiro_wilk(RNG(seed).exponential(size=1000))
        assert p < 0.001


def test_shapiro_few_distinct_values_near_zero():
    x = np.tile([0.0, 1.0, 2.0], 200)
    assert stats.shapiro_wilk(x) < 1e-6


def test_shapiro_constant_is_zero_by_convention():
    assert stats.shapiro_wilk(np.ones(100)) == 0.0


def test_shapiro_subsample_above_max_is_deterministic():
    x = RNG(4).normal(size=6000)
    assert stats.shapiro_wilk(x, seed=1) == stats.shapiro_wilk(x, seed=1)
    assert 0.0 <= stats.shapiro_wilk(x, seed=1) <= 1.0


# ---------------------------------------------------------------------------
# Heteroscedasticity test


def test_heteroscedasticity_homoscedastic_rarely_rejects():
    hits = 0
    for seed in range(100):
        rng = RNG(seed)
        x = rng.normal(size=300)
        y = x + rng.normal(size=300)
        p_xy, _ = stats.heteroscedasticity_test(x, y, method="gamma",
                                                seed=seed)
        hits += p_xy < 0.01
    assert hits <= 3


def test_heteroscedasticity_multiplicative_noise_detected():
    hits = 0
    for seed in range(20):
        rng = RNG(100 + seed)
        x = rng.normal(size=1000)
        y = x * rng.normal(size=1000)
        p_xy, _ = stats.heteroscedasticity_test(x, y, method="gamma",
                                                seed=seed)
        hits += p_xy < 0.01
    assert hits >= 18                            # power > 0.9


def test_heteroscedasticity_constant_input():
    y = RNG(5).normal(size=200)
    p_xy, p_yx = stats.heteroscedasticity_test(np.ones(200), y,
                                               method="gamma")
    assert p_xy == 1.0


# ---------------------------------------------------------------------------
# Regression engines


def test_linear_fit_exact_line():
    x = np.linspace(-3, 3, 400)
    y = 2.0 * x + 1.0
    fit = stats.fit_regression(x, y, "linear")
    assert np.max(np.abs(fit.residuals)) < 1e-8
    assert np.allclose(fit(np.array([0.0, 10.0])), [1.0, 21.0])


def test_linear_fit_residual_mean_zero():
    rng = RNG(6)
    x = rng.normal(size=500)
    y = 3 * x + rng.normal(size=500)
    fit = stats.fit_regression(x, y, "linear")
    assert abs(fit.residuals.mean()) < 1e-8 * max(fit.residuals.std(), 1e-12)
    assert np.allclose(fit.residuals, y - fit.fitted)


def test_nonlinear_beats_linear_on_cubic():
    rng = RNG(7)
    x = rng.uniform(-2, 2, size=1000)
    y = x ** 3 + 0.1 * rng.normal(size=1000)
    lin = stats.fit_regression(x, y, "linear")
    nl = stats.fit_regression(x, y, "nonlinear")
    assert nl.residuals.var() < 0.1 * lin.residuals.var()


def test_constant_predictor_is_singular_fit():
    y = RNG(8).normal(size=100)
    for kind in ("linear", "nonlinear"):
        fit = stats.fit_regression(np.ones(100), y, kind)
        assert fit.singular
        assert np.allclose(fit.residuals, y - y.mean())


def test_nonlinear_fit_deterministic():
    rng = RNG(9)
    x = rng.normal(size=900)
    y = np.sin(x) + 0.2 * rng.normal(size=900)
    a = stats.fit_regression(x, y, "nonlinear", seed=3)
    b = stats.fit_regression(x, y, "nonlinear", seed=3)
    assert np.array_equal(a.residuals, b.residuals)


def test_unknown_regression_kind_rejected():
    with pytest.raises(ValueError):
        stats.fit_regression(np.zeros(30), np.zeros(30), "quadratic")


def test_multicolumn_predictor_supported():
    rng = RNG(10)
    z = rng.normal(size=(600, 2))
    y = z[:, 0] - 2 * z[:, 1] + 0.1 * rng.normal(size=600)
    fit = stats.fit_regression(z, y, "nonlinear")
    assert fit.residuals.std() < 0.5 * y.std()


# ---------------------------------------------------------------------------
# Entropy estimators


def test_entropy_gaussian_closed_form():
    x = RNG(11).normal(size=5000)
    want = 0.5 * math.log(2 * math.pi * math.e)       # ~1.4189
    assert abs(stats.differential_entropy(x) - want) < 0.05


def test_entropy_uniform_closed_form():
    x = RNG(12).uniform(size=5000)
    assert abs(stats.differential_entropy(x) - 0.0) < 0.05


def test_entropy_scaling_law():
    x = RNG(13).normal(size=5000)
    h = stats.differential_entropy(x)
    h2 = stats.differential_entropy(2.0 * x)
    assert abs(h2 - (h + math.log(2.0))) < 0.05


def test_entropy_degenerate_sentinel():
    assert stats.differential_entropy(np.zeros(100)) == float("-inf")
    assert stats.differential_entropy(np.tile([0.0, 1.0, 2.0], 50)) == float("-inf")


def test_shannon_entropy_uniform_levels():
    x = np.tile([0, 1, 2, 3], 100)
    assert abs(stats.shannon_entropy(x) - math.log(4)) < 1e-12


def test_knn_score_standard_normal():
    # score of N(0,1) is -x; check sign agreement in the bulk
    x = RNG(14).normal(size=4000)
    score = stats.knn_score(x)
    bulk = np.abs(x) > 0.5
    agree = np.mean(np.sign(score[bulk]) == np.sign(-x[bulk]))
    assert agree > 0.8


# ---------------------------------------------------------------------------
# stable_seed


def test_stable_seed_deterministic_and_distinct():
    assert stats.stable_seed(1, "a", 2) == stats.stable_seed(1, "a", 2)
    assert stats.stable_seed(1, "a", 2) != stats.stable_seed(1, "a", 3)
    assert 0 <= stats.stable_seed("x") < 2 ** 32

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from emgconf.models import (
    LDA,
    QDA,
    GaussianClassParams,
    LabeledSamples,
    ModelFitError,
    fit_lda,
    fit_qda,
    log_gaussian_density,
    log_t_density,
    predict_and_confidence,
    predict_generative,
    regularized_cholesky,
)

from oracles import normal_inverse_gamma_integral


def random_spd(rng, d, scale=1.0):
    M = rng.normal(size=(d, d))
    return scale * (M @ M.T / d + 0.5 * np.eye(d))


def simpson(f, a, b, n=20000):
    """Composite Simpson rule on an even number of intervals."""
    x = np.linspace(a, b, n + 1)
    y = f(x)
    h = (b - a) / n
    return h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())


# -- densities ------------------------------------------------------------------

def test_standard_normal_at_mean():
    assert abs(log_gaussian_density([0.0], [0.0], [[1.0]]) - (-0.9189385332046727)) < 1e-12


@pytest.mark.parametrize("d", [1, 2, 5])
def test_gaussian_at_mean(d):
    rng = np.random.default_rng(d)
    mu = rng.normal(size=d)
    cov = random_spd(rng, d)
    expected = -0.5 * d * math.log(2 * math.pi) - 0.5 * np.linalg.slogdet(cov)[1]
    assert abs(log_gaussian_density(mu, mu, cov) - expected) < 1e-12


def test_gaussian_integrates_to_one():
    sigma = 1.7
    total = simpson(lambda x: np.exp(log_gaussian_density(x[:, None], [0.4], [[sigma**2]])),
                    0.4 - 10 * sigma, 0.4 + 10 * sigma)
    assert abs(total - 1.0) < 1e-8


def test_gaussian_matches_scipy():
    rng = np.random.default_rng(0)
    mu, cov = rng.normal(size=3), random_spd(rng, 3)
    X = rng.normal(size=(20, 3))
    np.testing.assert_allclose(log_gaussian_density(X, mu, cov),
                               stats.multivariate_normal(mu, cov).logpdf(X), rtol=1e-12)


def test_cauchy_at_mode():
    assert abs(log_t_density([0.0], [0.0], [[1.0]], 1.0) - (-math.log(math.pi))) < 1e-12


def test_t_gaussian_limit():
    rng = np.random.default_rng(5)
    mu, cov = rng.normal(size=3), random_spd(rng, 3)
    X = mu + rng.normal(size=(50, 3))
    np.testing.assert_allclose(log_t_density(X, mu, cov, 1e8), log_gaussian_density(X, mu, cov), atol=1e-4)


@pytest.mark.parametrize("seed", range(5))
def test_t_density_equals_scale_mixture_integral(seed):
    rng = np.random.default_rng(seed)
    mu, cov = rng.normal(size=2), random_spd(rng, 2)
    x = mu + rng.normal(size=2) * 2
    oracle = normal_inverse_gamma_integral(x, mu, cov, 0.1)
    assert abs(log_t_density(x, mu, cov, 0.1) - oracle) < 1e-6


def test_t_density_matches_scipy():
    rng = np.random.default_rng(1)
    mu, cov = rng.normal(size=3), random_spd(rng, 3)
    X = rng.normal(size=(10, 3))
    np.testing.assert_allclose(log_t_density(X, mu, cov, 2.5),
                               stats.multivariate_t(mu, cov, df=2.5).logpdf(X), rtol=1e-10)


@pytest.mark.parametrize("nu", [0.0, -1.0])
def test_t_density_rejects_bad_nu(nu):
    with pytest.raises(ValueError):
        log_t_density([0.0], [0.0], [[1.0]], nu)


def test_non_spd_covariance_is_fit_error():
    with pytest.raises(ModelFitError):
        log_gaussian_density([0.0, 0.0], [0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])


# -- LDA / QDA --------------------------------------------------------------------

def one_d(groups):
    X = np.concatenate([np.asarray(g, dtype=float) for g in groups])[:, None]
    y = np.concatenate([np.full(len(g), c) for c, g in enumerate(groups)])
    return LabeledSamples(X, y, len(groups))


def test_lda_hand_example():
    p = fit_lda(one_d([[0, 2], [4, 6]]))
    np.testing.assert_allclose(p.means.ravel(), [1.0, 5.0])
    np.testing.assert_allclose(p.covariances, [[1.0]])
    np.testing.assert_allclose(np.exp(p.log_priors), [0.5, 0.5])


def test_qda_hand_example():
    p = fit_qda(one_d([[0, 2], [3, 9]]))
    np.testing.assert_allclose(p.covariances.ravel(), [1.0, 9.0])


def test_single_class_posterior_is_one():
    rng = np.random.default_rng(0)
    data = LabeledSamples(rng.normal(size=(10, 2)), np.zeros(10, int), 1)
    for model in (LDA(), QDA()):
        probs = model.fit(data).predict_proba(rng.normal(size=(5, 2)) * 10)
        np.testing.assert_array_equal(probs, 1.0)


def test_duplicating_samples_leaves_fit_unchanged():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(30, 3))
    y = rng.integers(0, 3, 30)
    a = fit_lda(LabeledSamples(X, y, 3))
    b = fit_lda(LabeledSamples(np.vstack([X, X]), np.concatenate([y, y]), 3))
    np.testing.assert_allclose(a.means, b.means, atol=1e-12)
    np.testing.assert_allclose(a.covariances, b.covariances, atol=1e-12)
    np.testing.assert_allclose(a.log_priors, b.log_priors, atol=1e-12)


def test_qda_equals_lda_with_identical_scatter():
    rng = np.random.default_rng(3)
    base = rng.normal(size=(40, 2))
    base -= base.mean(axis=0)
    shifts = np.array([[0.0, 0.0], [3.0, 1.0], [-2.0, 2.0]])
    X = np.vstack([base + s for s in shifts])
    y = np.repeat(np.arange(3), 40)
    data = LabeledSamples(X, y, 3)
    test = rng.normal(size=(200, 2)) * 3
    np.testing.assert_allclose(QDA().fit(data).predict_proba(test), LDA().fit(data).predict_proba(test),
                               atol=1e-9)


def test_qda_label_permutation_permutes_parameters():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(60, 2)) + np.repeat(rng.normal(size=(3, 2)) * 3, 20, axis=0)
    y = np.repeat(np.arange(3), 20)
    perm = np.array([2, 0, 1])  # old class c becomes perm[c]
    a = fit_qda(LabeledSamples(X, y, 3))
    b = fit_qda(LabeledSamples(X, perm[y], 3))
    np.testing.assert_allclose(b.means[perm], a.means)
    np.testing.assert_allclose(b.covariances[perm], a.covariances)


def test_lda_log_odds_are_affine():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(90, 3)) + np.repeat(rng.normal(size=(3, 3)) * 2, 30, axis=0)
    data = LabeledSamples(X, np.repeat(np.arange(3), 30), 3)
    model = LDA().fit(data)
    for _ in range(10):
        x0, direction = rng.normal(size=3), rng.normal(size=3)
        h = 0.5
        pts = np.array([x0 - h * direction, x0, x0 + h * direction])
        lj = model.log_joint(pts)
        log_odds = lj[:, 0] - lj[:, 1]
        assert abs(log_odds[0] - 2 * log_odds[1] + log_odds[2]) < 1e-6


def test_regularization_rescues_singular_covariance():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(40, 1))
    X = np.hstack([x, 2 * x])  # rank one
    y = np.repeat([0, 1], 20)
    X[y == 1] += 3
    model = LDA().fit(LabeledSamples(X, y, 2))
    probs = model.predict_proba(X)
    assert np.all(np.isfinite(probs))
    assert np.linalg.eigvalsh(model.params_.covariances).min() > 0


def test_regularized_cholesky_gives_up():
    with pytest.raises(ModelFitError):
        regularized_cholesky(np.array([[1.0, 0.0], [0.0, -5.0]]))


def test_too_few_samples_per_class():
    with pytest.raises(ModelFitError):
        fit_qda(LabeledSamples(np.zeros((3, 1)), [0, 0, 1], 2))


# -- Bayes posterior ----------------------------------------------------------------

class FixedLogDensity:
    def __init__(self, logdens, log_priors):
        self.logdens = np.asarray(logdens, dtype=float)
        self.log_priors = np.asarray(log_priors, dtype=float)

    def class_log_density(self, X):
        return self.logdens


def test_equal_densities_uniform_priors_give_uniform_posterior():
    p = predict_generative(FixedLogDensity([[-3.0] * 4], np.log([0.25] * 4)), None)
    np.testing.assert_allclose(p, 0.25, atol=1e-15)


@given(st.floats(-700, 700))
def test_two_class_posterior_is_logistic(d):
    p = predict_generative(FixedLogDensity([[d, 0.0]], np.log([0.5, 0.5])), None)
    expected = 1 / (1 + math.exp(-d)) if d > -700 else 0.0
    assert abs(p[0, 0] - expected) < 1e-12
    assert abs(p.sum() - 1) < 1e-12


@settings(max_examples=50)
@given(st.lists(st.floats(-1e4, 1e4), min_size=2, max_size=6), st.floats(-1e5, 1e5))
def test_posterior_invariant_to_log_density_shift(logdens, shift):
    priors = np.log(np.full(len(logdens), 1 / len(logdens)))
    a = predict_generative(FixedLogDensity([logdens], priors), None)
    b = predict_generative(FixedLogDensity([np.array(logdens) + shift], priors), None)
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_gaussian_params_round_trip():
    rng = np.random.default_rng(8)
    p = fit_qda(LabeledSamples(rng.normal(size=(20, 2)), np.repeat([0, 1], 10), 2))
    q = GaussianClassParams.from_dict(p.to_dict())
    X = rng.normal(size=(5, 2))
    np.testing.assert_array_equal(predict_generative(p, X), predict_generative(q, X))


def test_predict_and_confidence_examples():
    labels, conf = predict_and_confidence(np.array([[0.1, 0.7, 0.2]]))
    assert labels.tolist() == [1] and conf.tolist() == [0.7]  # class 2 in 1-based terms
    labels, conf = predict_and_confidence(np.full((1, 4), 0.25))
    assert labels.tolist() == [0] and conf.tolist() == [0.25]


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_confidence_at_least_one_over_c(seed, c):
    p = np.random.default_rng(seed).dirichlet(np.ones(c), size=20)
    _, conf = predict_and_confidence(p)
    assert np.all(conf >= 1 / c - 1e-15)

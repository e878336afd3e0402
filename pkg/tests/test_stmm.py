"""Tests for stmmreg.stmm."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from hypothesis import given, settings, strategies as st
import hypothesis.extra.numpy as npst
from scipy.integrate import quad
from scipy.stats import multivariate_normal, multivariate_t
from stmmreg.stmm import (
    InvalidMixtureParamsError,
    MixtureParams,
    expected_u,
    gamma_pdf,
    gaussian_log_pdf,
    mixture_density,
    normalize_log_weights,
    posterior_z,
    robust_posterior,
    scale_mixture_pdf,
    t_log_pdf,
    t_log_pdf_delta2,
)

coords = st.floats(-5.0, 5.0, allow_subnormal=False)
points = npst.arrays(np.float64, 3, elements=st.floats(-5.0, 5.0))


@settings(max_examples=100)
@given(points, points, st.floats(0.01, 10.0), st.floats(0.5, 50.0))
def test_t_log_pdf_matches_scipy(x, mu, sigma2, dof) -> None:
    want = multivariate_t.logpdf(x, loc=mu, shape=sigma2 * np.eye(3), df=dof)
    got = t_log_pdf(x, mu, MixtureParams(sigma2, dof))
    assert got == pytest.approx(want, rel=1e-10, abs=1e-10)


@settings(max_examples=100)
@given(points, points, st.floats(0.01, 10.0))
def test_gaussian_log_pdf_matches_scipy(x, mu, sigma2) -> None:
    want = multivariate_normal.logpdf(x, mean=mu, cov=sigma2 * np.eye(3))
    assert gaussian_log_pdf(x, mu, sigma2) == pytest.approx(want, rel=1e-10, abs=1e-10)


def test_t_log_pdf_broadcasts_over_centroids(rng) -> None:
    centroids = rng.normal(size=(7, 3))
    params = MixtureParams(0.4, 5.0)
    got = t_log_pdf(np.ones(3), centroids, params)
    assert got.shape == (7,)
    assert_allclose(got, [t_log_pdf(np.ones(3), c, params) for c in centroids])


@pytest.mark.parametrize("dof", [2.0, 3.0, 5.0, 10.0])
def test_gamma_scale_mixture_gives_t_density(dof: float) -> None:
    rng = np.random.default_rng(int(dof))
    params = MixtureParams(0.7, dof)
    for _ in range(20):
        mu = rng.normal(size=3)
        x = mu + rng.uniform(-1.5, 1.5, size=3)
        assert scale_mixture_pdf(x, mu, params) == pytest.approx(np.exp(t_log_pdf(x, mu, params)), rel=1e-6)


def test_large_dof_tends_to_gaussian() -> None:
    delta2 = np.linspace(0.0, 10.0, 21)
    t_values = t_log_pdf_delta2(delta2, MixtureParams(2.0, 1e8))
    gauss = gaussian_log_pdf(np.sqrt(2.0 * delta2)[:, None] * np.array([1.0, 0, 0]), np.zeros(3), 2.0)
    assert_allclose(t_values, gauss, atol=1e-6)


def test_t_tail_is_heavier_than_gaussian() -> None:
    far = np.array([10.0, 0.0, 0.0])
    assert t_log_pdf(far, np.zeros(3), MixtureParams(1.0, 3.0)) > gaussian_log_pdf(far, np.zeros(3), 1.0)


@pytest.mark.parametrize("alpha, beta", [(0.5, 0.5), (1.0, 1.0), (1.5, 1.5), (5.0, 5.0), (2.0, 0.3)])
def test_gamma_pdf_integrates_to_one(alpha: float, beta: float) -> None:
    total, _ = quad(lambda u: gamma_pdf(u, alpha, beta), 0.0, np.inf, limit=200)
    assert total == pytest.approx(1.0, rel=1e-7)


def test_gamma_pdf_vectorises_and_is_zero_below_support() -> None:
    values = gamma_pdf(np.array([-1.0, 0.0, 1.0]), 2.0, 1.0)
    assert_allclose(values, [0.0, 0.0, np.exp(-1.0)])


def test_posterior_is_normalised_for_many_inputs(rng) -> None:
    log_f = rng.uniform(-1e5, 10.0, size=(25000, 4))
    probabilities = normalize_log_weights(log_f)
    assert np.all(np.isfinite(probabilities))
    assert np.all(probabilities >= 0)
    assert_allclose(probabilities.sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("dof", [0.5, 3.0, 30.0])
def test_expected_u_bounds(rng, dof: float) -> None:
    params = MixtureParams(1.0, dof)
    delta2 = np.concatenate([[0.0, 1e300], rng.exponential(100.0, size=100000)])
    scale = expected_u(delta2, params)
    assert np.all(scale > 0)
    assert np.all(scale <= (dof + 3.0) / dof)
    assert scale[0] == (dof + 3.0) / dof


def test_expected_u_is_one_at_delta2_three() -> None:
    assert expected_u(3.0, MixtureParams(1.0, 7.0)) == pytest.approx(1.0)


@settings(max_examples=200)
@given(st.floats(3.5, 1e6), st.floats(0.1, 100.0), st.floats(1.001, 10.0))
def test_expected_u_grows_with_dof_beyond_d(delta2, dof, factor) -> None:
    low = expected_u(delta2, MixtureParams(1.0, dof))
    high = expected_u(delta2, MixtureParams(1.0, dof * factor))
    assert low < high


@settings(max_examples=200)
@given(st.floats(0.0, 2.5), st.floats(0.1, 100.0), st.floats(1.001, 10.0))
def test_expected_u_shrinks_with_dof_inside_d(delta2, dof, factor) -> None:
    assert expected_u(delta2, MixtureParams(1.0, dof * factor)) < expected_u(delta2, MixtureParams(1.0, dof))


@settings(max_examples=100)
@given(
    npst.arrays(np.float64, 3, elements=coords),
    npst.arrays(np.float64, (4, 3), elements=coords),
    st.floats(0.05, 5.0),
    st.floats(1e-3, 1e3),
    st.floats(0.5, 30.0),
)
def test_posterior_ignores_a_common_scale(x, centroids, sigma2, scale, dof) -> None:
    plain = posterior_z(x, centroids, MixtureParams(sigma2, dof))
    scaled = posterior_z(scale * x, scale * centroids, MixtureParams(scale**2 * sigma2, dof))
    assert_allclose(scaled, plain, rtol=1e-9, atol=1e-12)


def test_far_apart_points_stay_finite() -> None:
    params = MixtureParams(1e-6, 3.0)
    centroids = np.array([[1e6, 0.0, 0.0], [1e6 + 1.0, 0.0, 0.0], [-1e6, 0.0, 0.0]])
    weights = posterior_z(np.array([1e6 + 0.9, 0.0, 0.0]), centroids, params)
    assert np.all(np.isfinite(weights))
    assert weights.sum() == pytest.approx(1.0)
    assert np.argmax(weights) == 1


def test_mixture_density_is_mean_of_components(rng) -> None:
    params = MixtureParams(0.5, 4.0)
    x, centroids = rng.normal(size=3), rng.normal(size=(3, 3))
    want = np.mean([np.exp(t_log_pdf(x, c, params)) for c in centroids])
    assert mixture_density(x, centroids, params) == pytest.approx(want, rel=1e-12)


def test_posterior_favours_the_closer_centroid() -> None:
    weights = posterior_z(np.zeros(3), [[0.1, 0, 0], [2.0, 0, 0]], MixtureParams(0.5, 3.0))
    assert weights[0] > weights[1]
    assert weights.sum() == pytest.approx(1.0)


def test_robust_posterior_is_product() -> None:
    assert_allclose(robust_posterior(np.array([0.5, 0.25]), np.array([2.0, 4.0])), [1.0, 1.0])


@pytest.mark.parametrize(
    "sigma2, dof, dim",
    [(0.0, 3.0, 3), (-1.0, 3.0, 3), (np.nan, 3.0, 3), (1.0, 0.0, 3), (1.0, np.inf, 3), (1.0, 3.0, 2)],
)
def test_invalid_params_raise(sigma2: float, dof: float, dim: int) -> None:
    with pytest.raises(InvalidMixtureParamsError):
        MixtureParams(sigma2, dof, dim)


def test_invalid_arguments_raise() -> None:
    with pytest.raises(InvalidMixtureParamsError):
        gamma_pdf(1.0, 0.0, 1.0)
    with pytest.raises(InvalidMixtureParamsError):
        expected_u(-0.1, MixtureParams(1.0))
    with pytest.raises(InvalidMixtureParamsError):
        mixture_density(np.zeros(3), np.zeros((0, 3)), MixtureParams(1.0))
    with pytest.raises(InvalidMixtureParamsError):
        gaussian_log_pdf(np.zeros(3), np.zeros(3), 0.0)

import math

import numpy as np
import pytest

from potdiag import error
from potdiag.core import empirical_quantile, exceedances
from potdiag.gpd import (
    GpdFit,
    fit_exceedances,
    gpd_cdf,
    gpd_fit,
    gpd_log_likelihood,
    gpd_quantile,
    mean_residual_life,
    parameter_stability,
    qq_envelope,
    return_level,
    return_level_ci,
    return_level_curve,
    return_period,
)
from potdiag.simulate import exact_gpd_sample, make


def _fit(xi=0.0, sigma=1.0, rate=0.01, threshold=10.0, n_obs=None, converged=True):
    return GpdFit(
        xi=xi,
        sigma=sigma,
        se_xi=0.05,
        se_sigma=0.1,
        cov_xi_sigma=0.0,
        n_fit=100,
        threshold=threshold,
        rate=rate,
        converged=converged,
        loglik=0.0,
        n_obs=n_obs,
    )


@pytest.mark.parametrize(
    "xi, sigma, y, expected", [(0.0, 1.0, 1.0, 0.632121), (1.0, 1.0, 3.0, 0.75)]
)
def test_cdf_hand_values(xi, sigma, y, expected):
    assert gpd_cdf(xi, sigma, y) == pytest.approx(expected, abs=1e-6)


def test_cdf_reaches_one_at_upper_endpoint():
    assert gpd_cdf(-0.5, 1.0, 2.0) == 1.0
    assert gpd_cdf(-0.5, 1.0, 5.0) == 1.0


@pytest.mark.parametrize("xi", [-0.3, 0.0, 1e-10, 0.27, 1.5])
def test_quantile_inverts_cdf(xi):
    p = np.linspace(0.0, 0.999, 50)
    np.testing.assert_allclose(gpd_cdf(xi, 2.0, gpd_quantile(xi, 2.0, p)), p, atol=1e-10)


def test_cdf_and_quantile_domain():
    with pytest.raises(error.InvalidParameter):
        gpd_cdf(0.1, 0.0, 1.0)
    with pytest.raises(error.InvalidParameter):
        gpd_cdf(0.1, 1.0, -1.0)
    with pytest.raises(error.InvalidParameter):
        gpd_quantile(0.1, 1.0, 1.0)


def test_log_likelihood_outside_support():
    assert gpd_log_likelihood(-0.5, 1.0, [1.0, 3.0]) == -np.inf
    assert gpd_log_likelihood(0.1, -1.0, [1.0]) == -np.inf
    assert gpd_log_likelihood(0.0, 1.0, [1.0, 2.0]) == pytest.approx(-3.0)


def test_fit_needs_ten_excesses():
    with pytest.raises(error.InsufficientDataError, match="at least 10"):
        gpd_fit(np.arange(1.0, 10.0))


def test_fit_of_equal_excesses():
    with pytest.raises(error.DegenerateScaleError):
        gpd_fit(np.ones(20))


def test_fit_is_deterministic():
    y = exact_gpd_sample(200, xi=0.1, sigma=2.0, seed=1)
    assert gpd_fit(y) == gpd_fit(y)


def test_fit_maximizes_the_likelihood():
    y = exact_gpd_sample(500, xi=0.2, sigma=3.0, seed=2)
    fit = gpd_fit(y)
    assert fit.converged
    for dxi, dsigma in [(0.02, 0.0), (-0.02, 0.0), (0.0, 0.05), (0.0, -0.05)]:
        assert fit.loglik >= gpd_log_likelihood(fit.xi + dxi, fit.sigma + dsigma, y)
    assert fit.se_xi > 0 and fit.se_sigma > 0


@pytest.mark.slow
def test_random_fits_maximize_the_likelihood():
    rng = np.random.default_rng(10)
    converged = 0
    for seed in range(1000):
        xi, sigma = rng.uniform(-0.1, 0.5), rng.uniform(0.5, 20.0)
        y = exact_gpd_sample(int(rng.integers(100, 1000)), xi=xi, sigma=sigma, seed=seed)
        fit = gpd_fit(y)
        if not fit.converged:
            continue
        converged += 1
        for dxi, scale in [(0.01, 1.0), (-0.01, 1.0), (0.0, 1.02), (0.0, 0.98)]:
            nearby = gpd_log_likelihood(fit.xi + dxi, fit.sigma * scale, y)
            assert fit.loglik >= nearby - 1e-6
    assert converged >= 990


def test_return_period_inverts_return_level_on_random_fits():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        fit = _fit(
            xi=rng.uniform(-0.4, 0.6),
            sigma=rng.uniform(0.1, 20.0),
            rate=rng.uniform(0.005, 0.2),
            threshold=rng.uniform(-10.0, 10.0),
        )
        obs_per_year, years = rng.uniform(200.0, 365.0), rng.uniform(2.0, 1000.0)
        level = return_level(fit, obs_per_year, years)
        assert return_period(fit, obs_per_year, level) == pytest.approx(years, rel=1e-9)


def test_fit_exceedances_records_rate():
    series = make("exact_gpd", n=5000, seed=3)
    u = empirical_quantile(series, 0.9)
    fit = fit_exceedances(series, u)
    assert fit.threshold == u
    assert fit.n_fit == exceedances(series, u).N
    assert fit.rate == pytest.approx(fit.n_fit / 5000)
    assert fit.n_obs == 5000


def test_fit_cluster_peaks():
    series = make("ar1", n=20000, seed=4)
    u = empirical_quantile(series, 0.95)
    peaks = fit_exceedances(series, u, K=1)
    everything = fit_exceedances(series, u)
    assert peaks.n_fit < everything.n_fit
    assert peaks.rate < everything.rate


@pytest.mark.slow
def test_fit_recovers_parameters():
    xi_hits = sigma_hits = 0
    for seed in range(100):
        fit = gpd_fit(exact_gpd_sample(1000, xi=0.27, sigma=14.8, seed=seed))
        xi_hits += abs(fit.xi - 0.27) < 1.96 * fit.se_xi
        sigma_hits += abs(fit.sigma - 14.8) < 1.96 * fit.se_sigma
    assert xi_hits >= 85
    assert sigma_hits >= 85


def test_return_level_hand_value():
    fit = _fit()
    assert return_level(fit, 100, 100) == pytest.approx(10 + math.log(100), abs=1e-3)
    assert return_level(fit, 100, 100) == pytest.approx(14.605, abs=1e-3)


def test_return_period_inverts_return_level():
    fit = _fit(xi=0.2, sigma=2.0)
    level = return_level(fit, 365, 50)
    assert return_period(fit, 365, level) == pytest.approx(50)


def test_return_period_beyond_upper_endpoint():
    fit = _fit(xi=-0.25, sigma=1.0)
    assert fit.upper_endpoint == pytest.approx(14.0)
    assert return_period(fit, 100, 20.0) == np.inf


def test_return_period_at_or_below_threshold():
    with pytest.raises(error.InvalidParameter, match="above the threshold"):
        return_period(_fit(), 100, 10.0)


def test_return_level_needs_an_expected_exceedance():
    with pytest.raises(error.InvalidParameter):
        return_level(_fit(rate=0.001), 100, 1)


def test_return_level_interval():
    fit = _fit(xi=0.1, sigma=2.0, n_obs=10000)
    estimate = return_level_ci(fit, 100, 100)
    assert estimate.level == pytest.approx(return_level(fit, 100, 100))
    assert estimate.lower < estimate.level < estimate.upper
    assert estimate.se > return_level_ci(_fit(xi=0.1, sigma=2.0), 100, 100).se


def test_return_level_curve_skips_short_periods():
    curve = return_level_curve(_fit(rate=0.001), 100, [1, 10, 100])
    assert [estimate.period for estimate in curve] == [100.0]
    levels = [e.level for e in return_level_curve(_fit(), 100, [2, 10, 100])]
    assert levels == sorted(levels)


def test_mean_residual_life_of_exponential_excesses():
    draws = np.random.default_rng(5).exponential(2.0, size=50000)
    trace = mean_residual_life(draws, [0.9, 0.95, 0.99], level=0.999)
    for point in trace:
        assert point.flag == "ok"
        assert point.lower < 2.0 < point.upper


def test_mean_residual_life_flags_sparse_thresholds():
    values = np.arange(1.0, 101.0)
    trace = mean_residual_life(values, [0.5, 0.98])
    assert trace[0].flag == "ok"
    assert trace[0].value == pytest.approx(25.5)
    assert trace[1].flag == "too_few_exceedances"
    assert trace[1].value is None


def test_parameter_stability_of_exact_model():
    series = make("exact_gpd", n=20000, seed=6)
    shapes, scales = parameter_stability(series, [0.5, 0.7, 0.9], level=0.999)
    for shape, scale in zip(shapes, scales):
        assert shape.flag == "ok"
        assert shape.lower < 0.27 < shape.upper
        assert scale.lower < 14.8 < scale.upper


def test_parameter_stability_flags_missing_fits():
    series = make("exact_gpd", n=500, seed=7)
    shapes, scales = parameter_stability(series, [0.9, 0.999])
    assert shapes[0].flag == "ok"
    assert shapes[1].flag == "too_few_exceedances"
    assert scales[1].value is None


def test_qq_envelope_is_deterministic():
    y = exact_gpd_sample(300, xi=0.27, sigma=14.8, seed=8)
    fit = gpd_fit(y)
    first = qq_envelope(fit, y, B=50, seed=3)
    second = qq_envelope(fit, y, B=50, seed=3)
    np.testing.assert_array_equal(first.lower, second.lower)
    np.testing.assert_array_equal(first.upper, second.upper)
    assert np.all(first.lower <= first.upper)
    assert np.mean(first.inside) > 0.8
    assert len(first.rows()) == 300


def test_qq_envelope_domain():
    y = exact_gpd_sample(50, xi=0.1, sigma=1.0, seed=9)
    with pytest.raises(error.InvalidParameter, match="converged"):
        qq_envelope(_fit(converged=False), y)
    with pytest.raises(error.InvalidParameter):
        qq_envelope(gpd_fit(y), y, B=0)

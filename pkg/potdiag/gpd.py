"""Generalized Pareto fitting of threshold excesses, threshold diagnostics and return levels.

The generalized Pareto distribution function of an excess ``y >= 0`` is

    H(y) = 1 - (1 + xi y / sigma) ** (-1 / xi),    xi != 0
    H(y) = 1 - exp(-y / sigma),                      xi == 0

Shapes with ``|xi| < 1e-8`` use the exponential form throughout.
"""
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy import optimize, stats

from potdiag import error, logger
from potdiag.core import (
    TimeSeries,
    decluster_runs,
    empirical_quantile,
    exceedances,
)
from potdiag.utils import seeding

SHAPE_ZERO_TOLERANCE = 1e-8
SHAPE_BOUNDS = (-0.5 + 1e-6, 5.0)
MIN_FIT_EXCESSES = 10
MIN_MRL_EXCEEDANCES = 5
_SHAPE_GRID_SIZE = 56


@dataclass(frozen=True)
class GpdFit:
    """Maximum likelihood generalized Pareto fit of the excesses over ``threshold``.

    ``rate`` is the exceedance rate per observation of whatever was fitted: all exceedances
    (``N / n``) or cluster peaks (clusters ``/ n``). ``n_obs`` is the length ``n`` of the
    series the rate was estimated from, when known.
    """

    xi: float
    sigma: float
    se_xi: float
    se_sigma: float
    cov_xi_sigma: float
    n_fit: int
    threshold: float
    rate: float
    converged: bool
    loglik: float
    n_obs: Optional[int] = None

    @property
    def covariance(self) -> np.ndarray:
        return np.array(
            [
                [self.se_xi**2, self.cov_xi_sigma],
                [self.cov_xi_sigma, self.se_sigma**2],
            ]
        )

    @property
    def upper_endpoint(self) -> float:
        """Largest possible observation, ``inf`` unless ``xi < 0``."""
        if self.xi < -SHAPE_ZERO_TOLERANCE:
            return self.threshold - self.sigma / self.xi
        return np.inf

    def to_dict(self) -> dict:
        return asdict(self)


def _check_scale(sigma: float):
    if not sigma > 0:
        raise error.InvalidParameter(f"Scale must be positive, not {sigma}")


def gpd_cdf(xi: float, sigma: float, y: ArrayLike) -> Union[float, np.ndarray]:
    """Distribution function of the excesses; 1 beyond the upper endpoint when ``xi < 0``."""
    _check_scale(sigma)
    y_arr = np.asarray(y, dtype=np.float64)
    if np.any(y_arr < 0):
        raise error.InvalidParameter("Excesses must be non-negative")
    if abs(xi) < SHAPE_ZERO_TOLERANCE:
        out = -np.expm1(-y_arr / sigma)
    else:
        z = xi * y_arr / sigma
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(z <= -1, 1.0, -np.expm1(-np.log1p(np.maximum(z, -1)) / xi))
    return float(out) if np.ndim(y) == 0 else out


def gpd_quantile(xi: float, sigma: float, p: ArrayLike) -> Union[float, np.ndarray]:
    """Exact inverse of :func:`gpd_cdf` on ``0 <= p < 1``."""
    _check_scale(sigma)
    p_arr = np.asarray(p, dtype=np.float64)
    if np.any(p_arr < 0) or np.any(p_arr >= 1):
        raise error.InvalidParameter("Quantile probabilities must lie in [0, 1)")
    if abs(xi) < SHAPE_ZERO_TOLERANCE:
        out = -sigma * np.log1p(-p_arr)
    else:
        out = sigma / xi * np.expm1(-xi * np.log1p(-p_arr))
    return float(out) if np.ndim(p) == 0 else out


def gpd_log_likelihood(xi: float, sigma: float, y: ArrayLike) -> float:
    """Log likelihood of independent excesses, ``-inf`` outside the support."""
    y = np.asarray(y, dtype=np.float64)
    if not sigma > 0:
        return -np.inf
    if abs(xi) < SHAPE_ZERO_TOLERANCE:
        return float(-len(y) * np.log(sigma) - np.sum(y) / sigma)
    z = xi * y / sigma
    if np.any(z <= -1):
        return -np.inf
    return float(-len(y) * np.log(sigma) - (1 + 1 / xi) * np.sum(np.log1p(z)))


def _profile_scale(xi: float, y: np.ndarray) -> Tuple[float, float]:
    """Scale maximizing the likelihood at fixed ``xi``, and the maximum."""
    y_max = float(np.max(y))
    low = np.log(max(-xi * y_max, 0.0) * (1 + 1e-10) + 1e-12)
    high = np.log(100.0 * y_max)

    def objective(log_sigma):
        value = gpd_log_likelihood(xi, np.exp(log_sigma), y)
        return -value if np.isfinite(value) else 1e300

    result = optimize.minimize_scalar(
        objective, bounds=(low, high), method="bounded", options={"xatol": 1e-10}
    )
    return float(np.exp(result.x)), float(-result.fun)


def _numerical_hessian(fn, point: np.ndarray) -> np.ndarray:
    """Central-difference Hessian of a scalar function of two or more variables."""
    point = np.asarray(point, dtype=np.float64)
    size = len(point)
    steps = 1e-4 * np.maximum(np.abs(point), 0.1)
    hessian = np.empty((size, size))
    for i in range(size):
        for j in range(i, size):
            e_i = np.zeros(size)
            e_j = np.zeros(size)
            e_i[i] = steps[i]
            e_j[j] = steps[j]
            value = (
                fn(point + e_i + e_j)
                - fn(point + e_i - e_j)
                - fn(point - e_i + e_j)
                + fn(point - e_i - e_j)
            ) / (4 * steps[i] * steps[j])
            hessian[i, j] = hessian[j, i] = value
    return hessian


def gpd_fit(
    excesses: ArrayLike,
    threshold: float = 0.0,
    rate: float = 1.0,
    n_obs: Optional[int] = None,
    strict: bool = True,
) -> GpdFit:
    """Maximum likelihood fit of the generalized Pareto distribution.

    The shape is profiled over ``[-0.5 + 1e-6, 5]``: a grid brackets the profile maximum, a
    bounded scalar search refines it, and a Nelder-Mead search in ``(xi, log sigma)``
    polishes the pair. Standard errors come from the inverse of the numerically
    differentiated observed information.

    Args:
        excesses: Positive excesses over the threshold, treated as independent
        threshold: Threshold the excesses are measured from
        rate: Rate per observation of the fitted excesses
        n_obs: Length of the series the rate was estimated from
        strict: Raise instead of returning a fit flagged as not converged

    Raises:
        InsufficientDataError: fewer than 10 excesses
        DegenerateScaleError: all excesses equal
        ConvergenceError: the optimiser failed, with ``strict``
    """
    y = np.asarray(excesses, dtype=np.float64)
    if len(y) < MIN_FIT_EXCESSES:
        raise error.InsufficientDataError(
            f"A generalized Pareto fit needs at least {MIN_FIT_EXCESSES} excesses, got {len(y)}"
        )
    if np.any(~np.isfinite(y)) or np.any(y < 0):
        raise error.InvalidParameter("Excesses must be finite and non-negative")
    if np.ptp(y) == 0:
        raise error.DegenerateScaleError("All excesses are equal")

    # fit on unit-mean data, the shape being scale free
    scale = float(np.mean(y))
    z = y / scale
    grid = np.linspace(*SHAPE_BOUNDS, _SHAPE_GRID_SIZE)
    profile = np.array([_profile_scale(xi, z)[1] for xi in grid])
    best = int(np.argmax(profile))
    bracket = (grid[max(best - 1, 0)], grid[min(best + 1, len(grid) - 1)])
    refined = optimize.minimize_scalar(
        lambda xi: -_profile_scale(xi, z)[1],
        bounds=bracket,
        method="bounded",
        options={"xatol": 1e-8},
    )
    xi0 = float(refined.x)
    sigma0, _ = _profile_scale(xi0, z)

    def negative_loglik(params):
        xi, log_sigma = params
        if not SHAPE_BOUNDS[0] <= xi <= SHAPE_BOUNDS[1]:
            return np.inf
        value = gpd_log_likelihood(xi, np.exp(log_sigma), z)
        return -value if np.isfinite(value) else np.inf

    polished = optimize.minimize(
        negative_loglik,
        x0=np.array([xi0, np.log(sigma0)]),
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000},
    )
    if polished.success and polished.fun <= negative_loglik([xi0, np.log(sigma0)]):
        xi_hat, sigma_z = float(polished.x[0]), float(np.exp(polished.x[1]))
    else:
        xi_hat, sigma_z = xi0, sigma0
    converged = bool(refined.success) and np.isfinite(negative_loglik([xi_hat, np.log(sigma_z)]))

    if min(xi_hat - SHAPE_BOUNDS[0], SHAPE_BOUNDS[1] - xi_hat) < 1e-5:
        logger.warn("Shape estimate %.4f lies on the boundary of the search range", xi_hat)
        converged = False

    hessian = _numerical_hessian(
        lambda params: gpd_log_likelihood(params[0], params[1], z),
        np.array([xi_hat, sigma_z]),
    )
    se_xi = se_sigma = cov = np.nan
    information = -hessian
    if np.all(np.isfinite(information)) and np.all(np.linalg.eigvalsh(information) > 0):
        covariance = np.linalg.inv(information)
        se_xi = float(np.sqrt(covariance[0, 0]))
        se_sigma = float(np.sqrt(covariance[1, 1]) * scale)
        cov = float(covariance[0, 1] * scale)
    else:
        logger.warn("Observed information is not positive definite at the estimate")
        converged = False

    sigma_hat = sigma_z * scale
    fit = GpdFit(
        xi=xi_hat,
        sigma=sigma_hat,
        se_xi=se_xi,
        se_sigma=se_sigma,
        cov_xi_sigma=cov,
        n_fit=len(y),
        threshold=float(threshold),
        rate=float(rate),
        converged=converged,
        loglik=gpd_log_likelihood(xi_hat, sigma_hat, y),
        n_obs=n_obs,
    )
    if not converged:
        if strict:
            raise error.ConvergenceError(
                f"The generalized Pareto fit did not converge (xi={xi_hat:.4f}, "
                f"sigma={sigma_hat:.4g})"
            )
        logger.warn("Generalized Pareto fit on %d excesses did not converge", len(y))
    return fit


def fit_exceedances(
    series: Union[TimeSeries, ArrayLike],
    threshold: float,
    K: Optional[int] = None,
    strict: bool = True,
) -> GpdFit:
    """Fits the excesses over ``threshold``, cluster peaks only when ``K`` is given.

    The rate is ``N / n`` for all exceedances and the number of clusters over ``n`` for
    peaks.
    """
    record = exceedances(series, threshold)
    if K is None:
        excesses, count = record.excesses, record.N
    else:
        clusters = decluster_runs(record, K)
        excesses, count = clusters.peak_excesses, clusters.n_clusters
    return gpd_fit(
        excesses,
        threshold=threshold,
        rate=count / record.n,
        n_obs=record.n,
        strict=strict,
    )


# Threshold diagnostics


@dataclass(frozen=True)
class TracePoint:
    """One point of a diagnostic trace against the threshold, with a confidence band.

    Missing points carry ``None`` values and a ``flag`` other than ``"ok"``.
    """

    p: float
    threshold: float
    value: Optional[float]
    lower: Optional[float]
    upper: Optional[float]
    n: int
    flag: str = "ok"

    def to_dict(self) -> dict:
        return asdict(self)


def mean_residual_life(
    series: Union[TimeSeries, ArrayLike], p_grid: Sequence[float], level: float = 0.95
) -> List[TracePoint]:
    """Mean excess over the ``p_grid`` quantiles with normal-approximation intervals.

    Thresholds leaving fewer than 5 exceedances are marked ``too_few_exceedances``.
    """
    z = stats.norm.ppf(0.5 + level / 2)
    trace = []
    for p in p_grid:
        u = empirical_quantile(series, p)
        try:
            record = exceedances(series, u)
        except error.NoExceedancesError:
            trace.append(TracePoint(p, u, None, None, None, 0, "too_few_exceedances"))
            continue
        if record.N < MIN_MRL_EXCEEDANCES:
            trace.append(TracePoint(p, u, None, None, None, record.N, "too_few_exceedances"))
            continue
        mean = float(np.mean(record.excesses))
        half = z * float(np.std(record.excesses, ddof=1)) / np.sqrt(record.N)
        trace.append(TracePoint(p, u, mean, mean - half, mean + half, record.N))
    return trace


def parameter_stability(
    series: Union[TimeSeries, ArrayLike],
    p_grid: Sequence[float],
    K: Optional[int] = None,
    level: float = 0.95,
) -> Tuple[List[TracePoint], List[TracePoint]]:
    """Shape and modified scale ``sigma - xi u`` of fits across thresholds.

    For data following the model above the lowest threshold both traces are constant in
    ``u``. Intervals use the delta method on the fit covariance.

    Returns:
        The shape trace and the modified scale trace
    """
    z = stats.norm.ppf(0.5 + level / 2)
    shapes, scales = [], []
    for p in p_grid:
        u = empirical_quantile(series, p)
        try:
            fit = fit_exceedances(series, u, K=K, strict=True)
        except error.Error as e:
            logger.debug("No fit at threshold %g: %s", u, e)
            flag = "fit_failed"
            if isinstance(e, error.InsufficientDataError):
                flag = "too_few_exceedances"
            missing = TracePoint(p, u, None, None, None, 0, flag)
            shapes.append(missing)
            scales.append(missing)
            continue
        shapes.append(
            TracePoint(p, u, fit.xi, fit.xi - z * fit.se_xi, fit.xi + z * fit.se_xi, fit.n_fit)
        )
        modified = fit.sigma - fit.xi * u
        variance = u**2 * fit.se_xi**2 - 2 * u * fit.cov_xi_sigma + fit.se_sigma**2
        half = z * np.sqrt(max(variance, 0.0))
        scales.append(TracePoint(p, u, modified, modified - half, modified + half, fit.n_fit))
    return shapes, scales


# Return levels


def _check_frequency(obs_per_year: float):
    if not obs_per_year > 0:
        raise error.InvalidParameter(
            f"Observations per year must be positive, not {obs_per_year}"
        )


def _exceedances_per_period(fit: GpdFit, obs_per_year: float, T_years: float) -> float:
    _check_frequency(obs_per_year)
    if not T_years > 0:
        raise error.InvalidParameter(f"Return period must be positive, not {T_years}")
    expected = T_years * obs_per_year * fit.rate
    if not expected > 1:
        raise error.InvalidParameter(
            f"A {T_years}-year return level needs more than one expected exceedance per "
            f"period, got {expected:.4g}"
        )
    return expected


def return_level(fit: GpdFit, obs_per_year: float, T_years: float) -> float:
    """Level exceeded on average once every ``T_years`` years.

    Solves ``rate * (1 - H(x - u)) = 1 / (T_years * obs_per_year)``.
    """
    expected = _exceedances_per_period(fit, obs_per_year, T_years)
    return fit.threshold + gpd_quantile(fit.xi, fit.sigma, 1 - 1 / expected)


def return_period(fit: GpdFit, obs_per_year: float, x: float) -> float:
    """Mean number of years between exceedances of ``x``, ``inf`` beyond the upper endpoint."""
    _check_frequency(obs_per_year)
    if not x > fit.threshold:
        raise error.InvalidParameter(
            f"Return periods are defined above the threshold {fit.threshold}, not at {x}"
        )
    survival = 1 - gpd_cdf(fit.xi, fit.sigma, x - fit.threshold)
    if survival <= 0:
        return np.inf
    return 1 / (obs_per_year * fit.rate * survival)


@dataclass(frozen=True)
class ReturnLevelEstimate:
    period: float
    level: float
    se: float
    lower: float
    upper: float

    def to_dict(self) -> dict:
        return asdict(self)


def _return_level_gradient(fit: GpdFit, exposures: float) -> np.ndarray:
    """Gradient of the return level in ``(xi, sigma, rate)``, ``exposures = T * obs_per_year``."""
    log_m = np.log(exposures * fit.rate)
    xi, sigma = fit.xi, fit.sigma
    if abs(xi) < SHAPE_ZERO_TOLERANCE:
        return np.array([sigma * log_m**2 / 2, log_m, sigma / fit.rate])
    growth = np.expm1(xi * log_m) / xi
    return np.array(
        [
            sigma * (log_m * np.exp(xi * log_m) - growth) / xi,
            growth,
            sigma * exposures**xi * fit.rate ** (xi - 1),
        ]
    )


def return_level_ci(
    fit: GpdFit, obs_per_year: float, T_years: float, level: float = 0.95
) -> ReturnLevelEstimate:
    """Return level with a delta-method interval.

    The variance combines the fit covariance of ``(xi, sigma)`` with the binomial variance
    ``rate (1 - rate) / n_obs`` of the rate, taken as zero when ``n_obs`` is unknown.
    """
    if not 0 < level < 1:
        raise error.InvalidParameter(f"Confidence level must lie in (0, 1), not {level}")
    x = return_level(fit, obs_per_year, T_years)
    covariance = np.zeros((3, 3))
    covariance[:2, :2] = fit.covariance
    if fit.n_obs:
        covariance[2, 2] = fit.rate * (1 - fit.rate) / fit.n_obs
    gradient = _return_level_gradient(fit, T_years * obs_per_year)
    se = float(np.sqrt(max(gradient @ covariance @ gradient, 0.0)))
    z = stats.norm.ppf(0.5 + level / 2)
    return ReturnLevelEstimate(
        period=float(T_years), level=x, se=se, lower=x - z * se, upper=x + z * se
    )


def return_level_curve(
    fit: GpdFit,
    obs_per_year: float,
    periods: Sequence[float],
    level: float = 0.95,
) -> List[ReturnLevelEstimate]:
    """Return levels with intervals over ``periods``, skipping periods too short to define one."""
    curve = []
    for period in periods:
        try:
            curve.append(return_level_ci(fit, obs_per_year, period, level))
        except error.InvalidParameter as e:
            logger.debug("Skipping return period %g: %s", period, e)
    return curve


# Quantile plot


@dataclass(frozen=True)
class QQEnvelope:
    """Ordered excesses against fitted quantiles at ``i / (n + 1)`` with a pointwise envelope."""

    model: np.ndarray
    empirical: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    replicates: int
    seed: int

    @property
    def inside(self) -> np.ndarray:
        return (self.empirical >= self.lower) & (self.empirical <= self.upper)

    def rows(self) -> List[dict]:
        return [
            {"x": float(m), "y": float(e), "lower": float(lo), "upper": float(hi)}
            for m, e, lo, hi in zip(self.model, self.empirical, self.lower, self.upper)
        ]


def qq_envelope(
    fit: GpdFit,
    excesses: ArrayLike,
    B: int = 200,
    seed: int = 0,
    level: float = 0.95,
) -> QQEnvelope:
    """Quantile plot points and a parametric bootstrap envelope.

    Each of the ``B`` resamples draws ``n`` excesses from the fitted model with seed
    ``seed + b``; the envelope holds the pointwise percentiles of their order statistics.

    Raises:
        InvalidParameter: the fit did not converge, or ``B < 1``
    """
    if not fit.converged:
        raise error.InvalidParameter("A quantile envelope needs a converged fit")
    if B < 1:
        raise error.InvalidParameter(f"At least one resample is needed, not {B}")
    empirical = np.sort(np.asarray(excesses, dtype=np.float64))
    n = len(empirical)
    positions = np.arange(1, n + 1) / (n + 1)
    model = gpd_quantile(fit.xi, fit.sigma, positions)
    resamples = np.empty((B, n))
    for b, replicate_seed in enumerate(seeding.replicate_seeds(seed, B)):
        rng, _ = seeding.np_random(replicate_seed)
        resamples[b] = np.sort(gpd_quantile(fit.xi, fit.sigma, rng.random(n)))
    tail = (1 - level) / 2
    lower, upper = np.quantile(resamples, [tail, 1 - tail], axis=0)
    return QQEnvelope(
        model=model,
        empirical=empirical,
        lower=lower,
        upper=upper,
        replicates=B,
        seed=seed,
    )

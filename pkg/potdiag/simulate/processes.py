"""Seedable generators of the benchmark processes and exact samplers of the limiting models.

Every generator takes the series length first and a ``seed`` keyword, draws all its
randomness from :func:`potdiag.utils.seeding.np_random` and is deterministic given the seed.
"""
import math
from typing import Optional

import numpy as np
from scipy import signal

from potdiag import error
from potdiag.core import KGapSample, TimeSeries
from potdiag.gpd import gpd_quantile
from potdiag.utils import seeding

DEFAULT_BURN_IN = 1000
FARIMA_TRUNCATION = 5000
NEWTON_TOLERANCE = 1e-10
_NEWTON_MAX_ITERATIONS = 100


def _check_length(n: int):
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise error.InvalidParameter(f"Series length must be a positive integer, not {n}")


def _check_burn_in(burn_in: int):
    if burn_in < 0:
        raise error.InvalidParameter(f"Burn-in must be non-negative, not {burn_in}")


def _open_uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniforms on (0, 1), zero draws moved to the smallest positive double."""
    return np.maximum(rng.random(size), np.finfo(np.float64).tiny)


def cauchy_innovations(rng: np.random.Generator, size: int) -> np.ndarray:
    """Standard Cauchy draws ``tan(pi (U - 1/2))``."""
    return np.tan(np.pi * (rng.random(size) - 0.5))


def pareto_innovations(rng: np.random.Generator, size: int, alpha: float) -> np.ndarray:
    """Pareto draws ``U ** (-1 / alpha)`` on ``[1, inf)`` with tail index ``alpha``."""
    return _open_uniform(rng, size) ** (-1.0 / alpha)


def ar1_cauchy(
    n: int, phi: float = 0.7, seed: Optional[int] = None, burn_in: int = DEFAULT_BURN_IN
) -> TimeSeries:
    """First-order autoregression ``Y_i = phi Y_{i-1} + Z_i`` with standard Cauchy ``Z_i``."""
    _check_length(n)
    _check_burn_in(burn_in)
    if not abs(phi) < 1:
        raise error.InvalidParameter(f"AR(1) coefficient must satisfy |phi| < 1, not {phi}")
    rng, _ = seeding.np_random(seed)
    innovations = cauchy_innovations(rng, n + burn_in)
    values = signal.lfilter([1.0], [1.0, -phi], innovations)[burn_in:]
    return TimeSeries(values, meta={"process": "ar1_cauchy"})


def ar1_cauchy_extremal_index(phi: float = 0.7, **_) -> Optional[float]:
    """``1 - phi`` for non-negative ``phi``; unknown otherwise."""
    return 1.0 - phi if phi >= 0 else None


def ar2_pareto(
    n: int,
    phi1: float = 0.95,
    phi2: float = -0.89,
    alpha: float = 2.0,
    seed: Optional[int] = None,
    burn_in: int = DEFAULT_BURN_IN,
) -> TimeSeries:
    """Second-order autoregression with Pareto innovations of tail index ``alpha``.

    Raises:
        InvalidParameter: coefficients outside the stationarity triangle, or ``alpha <= 0``
    """
    _check_length(n)
    _check_burn_in(burn_in)
    if not (phi2 + phi1 < 1 and phi2 - phi1 < 1 and abs(phi2) < 1):
        raise error.InvalidParameter(
            f"AR(2) coefficients ({phi1}, {phi2}) lie outside the stationarity triangle"
        )
    if not alpha > 0:
        raise error.InvalidParameter(f"Tail index must be positive, not {alpha}")
    rng, _ = seeding.np_random(seed)
    innovations = pareto_innovations(rng, n + burn_in, alpha)
    values = signal.lfilter([1.0], [1.0, -phi1, -phi2], innovations)[burn_in:]
    return TimeSeries(values, meta={"process": "ar2_pareto"})


def ar2_pareto_extremal_index(
    phi1: float = 0.95, phi2: float = -0.89, alpha: float = 2.0, **_
) -> Optional[float]:
    if phi1 == 0 and phi2 == 0:
        return 1.0
    if (phi1, phi2, alpha) == (0.95, -0.89, 2.0):
        return 0.25
    return None


def _logistic_transition(x: float, r: float, log_u: float) -> float:
    """Inverts the conditional distribution of the next value given ``x`` at ``log_u``.

    With ``v = (1 + exp(-r (y - x))) ** (1 / r) - 1`` the conditional log distribution
    function is ``-a v + (1 - r) log(1 + v)``, ``a = exp(-x)``, convex and decreasing in
    ``v >= 0``. Newton's method from ``v = 0`` therefore increases monotonically to the root.
    """
    a = math.exp(-x)
    target = log_u

    def h(v):
        return -a * v + (1 - r) * math.log1p(v) - target

    v = 0.0
    for _ in range(_NEWTON_MAX_ITERATIONS):
        slope = -a + (1 - r) / (1 + v)
        step = -h(v) / slope
        v += step
        if abs(step) <= NEWTON_TOLERANCE * v:
            break
    else:
        v = _bisect_transition(h)
    return x - math.log(math.expm1(r * math.log1p(v))) / r


def _bisect_transition(h) -> float:
    low, high = 0.0, 1.0
    while h(high) > 0:
        low, high = high, 2 * high
        if high > 1e300:
            raise error.ConvergenceError("Could not bracket the logistic transition")
    for _ in range(2000):
        middle = (low + high) / 2
        if h(middle) > 0:
            low = middle
        else:
            high = middle
        if high - low <= NEWTON_TOLERANCE * high:
            return high
    raise error.ConvergenceError("Bisection of the logistic transition did not converge")


def logistic_markov(
    n: int, r: float = 2.0, seed: Optional[int] = None, burn_in: int = 0
) -> TimeSeries:
    """Markov chain with Gumbel margins and symmetric logistic dependence of consecutive values.

    Consecutive pairs have joint distribution ``exp(-(exp(-r x) + exp(-r y)) ** (1 / r))``;
    ``r = 1`` gives independence. The chain starts in its stationary distribution.

    Raises:
        InvalidParameter: ``r < 1``
        ConvergenceError: a transition could not be inverted
    """
    _check_length(n)
    _check_burn_in(burn_in)
    if not r >= 1:
        raise error.InvalidParameter(f"Logistic dependence parameter must be >= 1, not {r}")
    rng, _ = seeding.np_random(seed)
    log_u = np.log(_open_uniform(rng, n + burn_in))
    values = np.empty(n + burn_in)
    x = -math.log(-log_u[0])
    values[0] = x
    for i in range(1, n + burn_in):
        x = _logistic_transition(x, r, float(log_u[i]))
        values[i] = x
    return TimeSeries(values[burn_in:], meta={"process": "logistic_markov"})


def logistic_markov_extremal_index(r: float = 2.0, **_) -> Optional[float]:
    """Known at ``r = 1`` (independence) and ``r = 2``."""
    return {1.0: 1.0, 2.0: 0.328}.get(float(r))


def farima_weights(d: float, truncation: int = FARIMA_TRUNCATION) -> np.ndarray:
    """Moving average weights of ``(1 - B) ** (-d)`` truncated at ``truncation`` lags.

    ``psi_0 = 1`` and ``psi_j = psi_{j-1} (j - 1 + d) / j``; ``d = 0`` gives the single weight 1.
    """
    if d == 0:
        return np.ones(1)
    j = np.arange(1, truncation + 1)
    return np.concatenate([[1.0], np.cumprod((j - 1 + d) / j)])


def farima(
    n: int,
    phi: float = 0.5,
    d: float = 0.0,
    seed: Optional[int] = None,
    truncation: int = FARIMA_TRUNCATION,
    burn_in: Optional[int] = None,
) -> TimeSeries:
    """Gaussian fractionally differenced ARIMA(1, d, 0) process.

    White noise is filtered by the moving average expansion of ``(1 - B) ** (-d)``
    truncated at ``truncation`` lags and then by the autoregression with coefficient
    ``phi``. The burn-in defaults to ``truncation + 1000``. With ``d = 0`` the output is
    exactly the Gaussian AR(1) recursion.

    Raises:
        InvalidParameter: ``d`` outside [0, 0.5) or ``|phi| >= 1``
    """
    _check_length(n)
    if not 0 <= d < 0.5:
        raise error.InvalidParameter(f"Difference parameter must lie in [0, 0.5), not {d}")
    if not abs(phi) < 1:
        raise error.InvalidParameter(f"AR(1) coefficient must satisfy |phi| < 1, not {phi}")
    if burn_in is None:
        burn_in = truncation + DEFAULT_BURN_IN
    _check_burn_in(burn_in)
    rng, _ = seeding.np_random(seed)
    noise = rng.standard_normal(n + burn_in)
    values = signal.lfilter(farima_weights(d, truncation), [1.0, -phi], noise)[burn_in:]
    return TimeSeries(values, meta={"process": "farima"})


def farima_extremal_index(d: float = 0.0, **_) -> Optional[float]:
    """One for the Gaussian AR(1) at ``d = 0``; no value is known for ``d > 0``."""
    return 1.0 if d == 0 else None


# Exact samplers of the limiting models


def _check_theta(theta: float):
    if not 0 < theta <= 1:
        raise error.InvalidParameter(f"Extremal index must lie in (0, 1], not {theta}")


def exact_mixture_gaps(N: int, theta: float, seed: Optional[int] = None) -> KGapSample:
    """Normalized gaps of the limiting model.

    Each gap is zero with probability ``1 - theta`` and otherwise exponential with rate
    ``theta``.
    """
    _check_length(N)
    _check_theta(theta)
    rng, _ = seeding.np_random(seed)
    positive = rng.random(N) < theta
    c = np.where(positive, rng.exponential(1.0 / theta, N), 0.0)
    return KGapSample(K=0, c=c)


def exact_mixture(
    n: int,
    theta: float = 0.5,
    tail_prob: float = 0.02,
    seed: Optional[int] = None,
    burn_in: int = 0,
) -> TimeSeries:
    """Series whose exceedances of the level 1 form clusters with extremal index ``theta``.

    Clusters are runs of adjacent exceedances of geometric size with mean ``1 / theta``,
    separated by geometric waits with success probability ``tail_prob * theta``, so the
    normalized K-gaps (any ``K >= 1``) follow the limiting mixture as ``tail_prob`` shrinks.
    Exceedances are ``1 + Exp(1)``, other values uniform on (0, 1).
    """
    _check_length(n)
    _check_theta(theta)
    _check_burn_in(burn_in)
    if not 0 < tail_prob < 1:
        raise error.InvalidParameter(f"Tail probability must lie in (0, 1), not {tail_prob}")
    rng, _ = seeding.np_random(seed)
    length = n + burn_in
    values = rng.random(length)
    marks = np.zeros(length, dtype=bool)
    wait = tail_prob * theta
    position = int(rng.geometric(wait)) - 1
    while position < length:
        size = int(rng.geometric(theta))
        marks[position : position + size] = True
        position += size - 1 + int(rng.geometric(wait))
    values[marks] = 1.0 + rng.exponential(1.0, int(np.count_nonzero(marks)))
    return TimeSeries(values[burn_in:], meta={"process": "exact_mixture"})


def exact_mixture_extremal_index(theta: float = 0.5, **_) -> float:
    return theta


def exact_gpd_sample(
    n: int, xi: float, sigma: float, seed: Optional[int] = None
) -> np.ndarray:
    """Independent generalized Pareto draws by inversion."""
    _check_length(n)
    if not sigma > 0:
        raise error.InvalidParameter(f"Scale must be positive, not {sigma}")
    rng, _ = seeding.np_random(seed)
    return gpd_quantile(xi, sigma, rng.random(n))


def exact_gpd(
    n: int,
    xi: float = 0.27,
    sigma: float = 14.8,
    seed: Optional[int] = None,
    burn_in: int = 0,
) -> TimeSeries:
    """Independent generalized Pareto series; the burn-in draws are discarded."""
    _check_burn_in(burn_in)
    values = exact_gpd_sample(n + burn_in, xi, sigma, seed=seed)[burn_in:]
    return TimeSeries(values, meta={"process": "exact_gpd"})

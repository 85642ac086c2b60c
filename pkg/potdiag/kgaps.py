"""K-gaps likelihood and maximum likelihood estimation of the extremal index.

Under the limiting model a normalized K-gap is zero with probability ``1 - theta`` and
otherwise exponential with rate ``theta``, giving the log likelihood

    (N - 1 - N_C) log(1 - theta) + 2 N_C log(theta) - theta * sum(c_i)

whose maximiser is the smaller root of a quadratic. Weighted samples (kernel-localised
estimation) multiply each gap's contribution by its weight.
"""
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import stats
from scipy.special import xlogy

from potdiag import error, logger
from potdiag.core import (
    ExceedanceRecord,
    KGapSample,
    TimeSeries,
    decimal_years,
    inter_exceedance_times,
    k_gaps,
)
from potdiag.utils import seeding

J_CONVENTIONS = ("squared", "literal")


@dataclass(frozen=True)
class ThetaEstimate:
    """Extremal index estimate from the K-gaps likelihood.

    ``se_sandwich`` and ``se_naive`` are ``None`` at a boundary estimate, where the
    likelihood is not regular. ``threshold_prob`` is the non-exceedance probability
    ``1 - tail_prob`` of the threshold, when known.
    """

    theta_hat: float
    loglik: float
    se_sandwich: Optional[float]
    se_naive: Optional[float]
    n_gaps: int
    n_c: float
    n_effective: float
    K: int
    threshold_prob: Optional[float]
    boundary: bool
    degenerate: bool = False

    def confidence_interval(self, level: float = 0.95) -> Optional[Tuple[float, float]]:
        """Normal interval from the sandwich standard error, clipped to [0, 1]."""
        if self.se_sandwich is None:
            return None
        z = stats.norm.ppf(0.5 + level / 2)
        return (
            max(0.0, self.theta_hat - z * self.se_sandwich),
            min(1.0, self.theta_hat + z * self.se_sandwich),
        )

    def to_dict(self) -> dict:
        return asdict(self)


def _check_theta(theta: float):
    if not 0 < theta < 1:
        raise error.DomainError(
            f"The K-gaps likelihood is only defined for 0 < theta < 1, not {theta}"
        )


def check_j_convention(j_convention: str):
    if j_convention not in J_CONVENTIONS:
        raise error.InvalidParameter(
            f"Unknown J convention `{j_convention}`, expected one of {J_CONVENTIONS}"
        )


def score_terms(theta: float, c: np.ndarray) -> np.ndarray:
    """Per-gap score ``-I(c=0)/(1-theta) + 2 I(c>0)/theta - c``, with no domain check."""
    c = np.asarray(c, dtype=np.float64)
    zero = c == 0
    out = -c.copy()
    if np.any(zero):
        out[zero] -= 1.0 / (1.0 - theta)
    out[~zero] += 2.0 / theta
    return out


def information_terms(theta: float, c: np.ndarray) -> np.ndarray:
    """Per-gap observed information ``I(c=0)/(1-theta)^2 + 2 I(c>0)/theta^2``."""
    c = np.asarray(c, dtype=np.float64)
    zero = c == 0
    out = np.empty_like(c)
    if np.any(zero):
        out[zero] = 1.0 / (1.0 - theta) ** 2
    out[~zero] = 2.0 / theta**2
    return out


def score_square_terms(
    theta: float, c: np.ndarray, j_convention: str = "squared"
) -> np.ndarray:
    """Per-gap squared score as summed in the empirical J.

    The squared score is ``I(c=0)/(1-theta)^2 + 4 I(c>0)/theta^2 + c^2 - 4c/theta``.
    ``j_convention="literal"`` replaces ``c^2`` by ``c``, a form that does not have mean
    zero for ``J - I`` under the limiting model; it is kept for comparison only.
    """
    check_j_convention(j_convention)
    c = np.asarray(c, dtype=np.float64)
    zero = c == 0
    out = np.empty_like(c)
    if np.any(zero):
        out[zero] = 1.0 / (1.0 - theta) ** 2
    c_term = c**2 if j_convention == "squared" else c
    out[~zero] = 4.0 / theta**2 + c_term[~zero] - 4.0 * c[~zero] / theta
    return out


def _sums(sample: KGapSample) -> Tuple[float, float, float]:
    w = sample.w
    return float(np.sum(w)), float(np.sum(w[sample.positive])), sample.sum_c


def _loglik_from_sums(theta: float, m: float, nc: float, s: float) -> float:
    return float(xlogy(m - nc, 1.0 - theta) + xlogy(2.0 * nc, theta) - theta * s)


def _closed_form(m: float, nc: float, s: float) -> float:
    """Smaller root of ``s t^2 - (s + m + nc) t + 2 nc = 0``, clipped to [0, 1].

    Written as ``4 nc / (b + sqrt(b^2 - 8 nc s))`` (product of the roots over the larger
    root), which avoids cancellation for large ``s`` and covers ``s = 0``.
    """
    b = s + m + nc
    discriminant = max(b * b - 8.0 * nc * s, 0.0)
    theta = 4.0 * nc / (b + np.sqrt(discriminant))
    return float(min(theta, 1.0))


def log_likelihood(theta: float, sample: KGapSample) -> float:
    """K-gaps log likelihood, weighted if the sample carries weights.

    Raises:
        DomainError: ``theta`` outside (0, 1)
    """
    _check_theta(theta)
    m, nc, s = _sums(sample)
    return _loglik_from_sums(theta, m, nc, s)


def score(theta: float, sample: KGapSample) -> float:
    """Weighted mean score of the sample at ``theta``."""
    _check_theta(theta)
    w = sample.w
    return float(np.sum(w * score_terms(theta, sample.c)) / np.sum(w))


def effective_sample_size(sample: KGapSample) -> float:
    """``(sum w)^2 / sum w^2``, the number of gaps for an unweighted sample."""
    w = sample.w
    return float(np.sum(w) ** 2 / np.sum(w**2))


def sandwich_se(
    theta: float, sample: KGapSample, j_convention: str = "squared"
) -> Tuple[Optional[float], Optional[float]]:
    """Sandwich and naive standard errors of the estimate at ``theta``.

    The sandwich variance is ``J / (n I^2)`` and the naive one ``1 / (n I)``, with ``I`` and
    ``J`` the (weighted) means of the per-gap information and squared score and ``n`` the
    effective sample size. Both are ``None`` at the boundary of the parameter space.
    """
    check_j_convention(j_convention)
    if not 0 < theta < 1:
        return None, None
    w = sample.w
    total = np.sum(w)
    info = float(np.sum(w * information_terms(theta, sample.c)) / total)
    jbar = float(np.sum(w * score_square_terms(theta, sample.c, j_convention)) / total)
    n = effective_sample_size(sample)
    se_naive = float(1.0 / np.sqrt(n * info))
    if jbar < 0:
        logger.warn(
            "Negative empirical score variance %.4g under the `%s` convention, "
            "sandwich standard error is undefined",
            jbar,
            j_convention,
        )
        return None, se_naive
    return float(np.sqrt(jbar / (n * info**2))), se_naive


def mle(
    sample: KGapSample,
    j_convention: str = "squared",
    threshold_prob: Optional[float] = None,
) -> ThetaEstimate:
    """Closed-form maximum likelihood estimate of the extremal index.

    A sample whose gaps are all zero gives ``theta_hat = 0``; a sample whose gaps are all
    positive may give a root at or above one, clipped to ``1``. Both are flagged as
    boundary estimates with absent standard errors.
    """
    m, nc, s = _sums(sample)
    theta = _closed_form(m, nc, s)
    boundary = theta <= 0.0 or theta >= 1.0
    if boundary:
        logger.debug(
            "K-gaps estimate at the boundary theta=%g (K=%d, %d gaps)",
            theta,
            sample.K,
            len(sample),
        )
        se_sandwich, se_naive = None, None
    else:
        se_sandwich, se_naive = sandwich_se(theta, sample, j_convention)
    n_effective = effective_sample_size(sample)
    if threshold_prob is None and sample.tail_prob is not None:
        threshold_prob = 1.0 - sample.tail_prob
    return ThetaEstimate(
        theta_hat=theta,
        loglik=_loglik_from_sums(theta, m, nc, s),
        se_sandwich=se_sandwich,
        se_naive=se_naive,
        n_gaps=int(np.count_nonzero(sample.w)),
        n_c=nc,
        n_effective=n_effective,
        K=sample.K,
        threshold_prob=threshold_prob,
        boundary=boundary,
        degenerate=n_effective < 2,
    )


def intervals_estimator(times: np.ndarray) -> float:
    """Intervals estimator of the extremal index from inter-exceedance times.

    Uses the bias-corrected moment ratio when some time exceeds two, the plain ratio
    otherwise, truncated at one.

    Raises:
        InsufficientDataError: fewer than two inter-exceedance times
    """
    times = np.asarray(times, dtype=np.float64)
    if len(times) < 2:
        raise error.InsufficientDataError(
            f"The intervals estimator needs at least 2 inter-exceedance times, got {len(times)}"
        )
    count = len(times)
    if np.max(times) <= 2:
        estimate = 2.0 * np.sum(times) ** 2 / (count * np.sum(times**2))
    else:
        estimate = (
            2.0 * np.sum(times - 1) ** 2 / (count * np.sum((times - 1) * (times - 2)))
        )
    return float(min(1.0, estimate))


# Local (kernel-weighted) estimation


def _uniform(x: np.ndarray) -> np.ndarray:
    return (np.abs(x) <= 1).astype(np.float64)


def _biweight(x: np.ndarray) -> np.ndarray:
    return np.where(np.abs(x) <= 1, (1 - x**2) ** 2, 0.0)


KERNELS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "uniform": _uniform,
    "biweight": _biweight,
}


def gap_times(record: ExceedanceRecord, series: Optional[TimeSeries] = None) -> np.ndarray:
    """Time of the exceedance opening each gap, aligned with :func:`inter_exceedance_times`.

    Times are fractional years when ``series`` has dates, 1-based positions otherwise.
    """
    openers = record.indices[:-1]
    if record.segments is not None:
        openers = openers[np.diff(record.segments) == 0]
    if series is not None and series.timestamps is not None:
        return decimal_years(series.timestamps[openers - 1])
    return openers.astype(np.float64)


def local_theta(
    sample: KGapSample,
    times: np.ndarray,
    center: float,
    bandwidth: float,
    kernel: str = "uniform",
    j_convention: str = "squared",
) -> ThetaEstimate:
    """Locally constant kernel-weighted K-gaps estimate at ``center``.

    Gap ``i`` gets weight ``kernel((t_i - center) / bandwidth)``; standard errors use the
    effective sample size of the weights. Estimates resting on fewer than two effective gaps
    are flagged ``degenerate`` whether or not they lie on the boundary: a single positive
    gap ``c > 2`` gives the interior estimate ``2 / c``.

    Raises:
        InvalidParameter: non-positive bandwidth or unknown kernel
        InsufficientDataError: all weights are zero
    """
    if not bandwidth > 0:
        raise error.InvalidParameter(f"Bandwidth must be positive, not {bandwidth}")
    if kernel not in KERNELS:
        raise error.InvalidParameter(
            f"Unknown kernel `{kernel}`, expected one of {sorted(KERNELS)}"
        )
    times = np.asarray(times, dtype=np.float64)
    if times.shape != sample.c.shape:
        raise error.InvalidParameter(f"Expected {len(sample)} gap times, got {len(times)}")
    weights = KERNELS[kernel]((times - center) / bandwidth)
    if not np.any(weights > 0):
        raise error.InsufficientDataError(
            f"No gap lies within bandwidth {bandwidth} of {center}"
        )
    estimate = mle(sample.with_weights(weights), j_convention=j_convention)
    if estimate.degenerate:
        logger.debug(
            "Local estimate at %g rests on %.2f effective gaps", center, estimate.n_effective
        )
    return estimate


def smooth_theta(
    sample: KGapSample,
    times: np.ndarray,
    centers: np.ndarray,
    bandwidth: float,
    kernel: str = "uniform",
    j_convention: str = "squared",
) -> List[Tuple[float, Optional[ThetaEstimate]]]:
    """Trajectory of local estimates; centres with no gap in range map to ``None``."""
    path = []
    for center in np.asarray(centers, dtype=np.float64):
        try:
            estimate = local_theta(sample, times, center, bandwidth, kernel, j_convention)
        except error.InsufficientDataError:
            logger.debug("No gaps around %g, skipping", center)
            estimate = None
        path.append((float(center), estimate))
    return path


# Bootstrap


@dataclass(frozen=True)
class BootstrapInterval:
    """Percentile bootstrap interval for the extremal index."""

    lower: float
    upper: float
    level: float
    replicates: int
    theta_hat: float
    seed: int
    degenerate: bool

    @property
    def contains_estimate(self) -> bool:
        return self.lower <= self.theta_hat <= self.upper

    def to_dict(self) -> dict:
        return {**asdict(self), "contains_estimate": self.contains_estimate}


def bootstrap_ci(
    record: ExceedanceRecord,
    K: int,
    B: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> BootstrapInterval:
    """Nonparametric bootstrap percentile interval for the K-gaps estimate.

    The inter-exceedance times are resampled with replacement, ``B`` times, keeping the
    tail probability of the original record; replicate ``b`` draws from seed ``seed + b``.

    Raises:
        InvalidParameter: ``B < 100`` or ``level`` outside (0, 1)
    """
    if B < 100:
        raise error.InvalidParameter(f"At least 100 bootstrap replicates are needed, not {B}")
    if not 0 < level < 1:
        raise error.InvalidParameter(f"Confidence level must lie in (0, 1), not {level}")
    times = inter_exceedance_times(record)
    sample = k_gaps(times, K, record.tail_prob)
    theta_hat = _closed_form(*_sums(sample))

    estimates = np.empty(B)
    for b, replicate_seed in enumerate(seeding.replicate_seeds(seed, B)):
        rng, _ = seeding.np_random(replicate_seed)
        resampled = rng.choice(times, size=len(times), replace=True)
        c = record.tail_prob * np.maximum(resampled - K, 0)
        positive = c > 0
        estimates[b] = _closed_form(float(len(c)), float(np.sum(positive)), float(np.sum(c)))

    degenerate = bool(np.all((estimates <= 0) | (estimates >= 1)))
    if degenerate:
        logger.warn("Every bootstrap estimate lies on the boundary, the interval is degenerate")
    lower, upper = np.quantile(estimates, [(1 - level) / 2, (1 + level) / 2])
    interval = BootstrapInterval(
        lower=float(lower),
        upper=float(upper),
        level=level,
        replicates=B,
        theta_hat=theta_hat,
        seed=seed,
        degenerate=degenerate,
    )
    if not interval.contains_estimate:
        logger.warn(
            "Bootstrap interval [%.4f, %.4f] does not contain the estimate %.4f",
            interval.lower,
            interval.upper,
            theta_hat,
        )
    return interval

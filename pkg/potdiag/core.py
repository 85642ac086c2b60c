"""Time series preprocessing and the exceedance structure used by every estimator.

The types here are immutable: arrays are copied on construction and marked read-only, so
values can be shared between threads and worker processes without locking.

Conventions:

* an exceedance of ``u`` is an observation strictly greater than ``u``;
* exceedance positions are 1-based, as in ``j_i`` of the K-gaps likelihood;
* quantiles are type-1 order statistics, ``x_(ceil(p n))`` of the sorted sample;
* median absolute deviations are scaled by :data:`MAD_SCALE` so that anomalies are
  comparable with unit variance under normality.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from potdiag import error

MAD_SCALE = 1.4826
DAYS_PER_YEAR = 365.25
SEASONAL_SMOOTHING_DAYS = 15
MIN_WINDOW_OBSERVATIONS = 10

# Day-of-year offsets on a 365-day calendar; 29 February is folded onto 28 February.
_MONTH_OFFSETS = np.array([0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334])

ArrayLike = Union[Sequence[float], np.ndarray]


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class TimeSeries:
    """Ordered observations with optional calendar dates.

    * values: observations in their own units
    * timestamps: optional ``datetime64[D]`` dates, strictly increasing
    * meta: free-form description (source file, generating process, ...)
    * segments: optional nondecreasing labels; inter-exceedance times never span two labels
    """

    values: np.ndarray
    timestamps: Optional[np.ndarray] = None
    meta: Dict[str, Any] = field(default_factory=dict)
    segments: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise error.InvalidParameter(
                f"Series values must be one-dimensional, actual shape: {values.shape}"
            )
        if len(values) < 2:
            raise error.InsufficientDataError(
                f"A time series needs at least 2 observations, got {len(values)}"
            )
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise error.DataError(f"Series value at position {bad + 1} is not finite")
        object.__setattr__(self, "values", _frozen(values))

        if self.timestamps is not None:
            timestamps = np.asarray(self.timestamps).astype("datetime64[D]")
            if timestamps.shape != values.shape:
                raise error.DataError(
                    f"Expected {len(values)} timestamps, got {len(timestamps)}"
                )
            if np.any(np.diff(timestamps.astype(np.int64)) <= 0):
                raise error.DataError("Timestamps must be strictly increasing")
            object.__setattr__(self, "timestamps", _frozen(timestamps))

        if self.segments is not None:
            segments = np.asarray(self.segments, dtype=np.int64)
            if segments.shape != values.shape or np.any(np.diff(segments) < 0):
                raise error.DataError(
                    "Segment labels must be nondecreasing with one label per observation"
                )
            object.__setattr__(self, "segments", _frozen(segments))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def n(self) -> int:
        """Number of observations."""
        return len(self.values)

    @property
    def has_dates(self) -> bool:
        return self.timestamps is not None

    def with_values(self, values: ArrayLike, **meta) -> "TimeSeries":
        """Returns a series on the same time axis with new values and extra metadata."""
        return replace(self, values=values, meta={**self.meta, **meta})

    def take(self, mask_or_slice: Union[slice, np.ndarray]) -> "TimeSeries":
        """Returns the sub-series selected by a boolean mask or slice."""
        return TimeSeries(
            values=self.values[mask_or_slice],
            timestamps=None
            if self.timestamps is None
            else self.timestamps[mask_or_slice],
            meta=dict(self.meta),
            segments=None if self.segments is None else self.segments[mask_or_slice],
        )


@dataclass(frozen=True)
class ExceedanceRecord:
    """Exceedances of a threshold ``u``: 1-based positions, excesses and the tail probability."""

    threshold: float
    indices: np.ndarray
    excesses: np.ndarray
    n: int
    segments: Optional[np.ndarray] = None

    def __post_init__(self):
        indices = np.asarray(self.indices, dtype=np.int64)
        excesses = np.asarray(self.excesses, dtype=np.float64)
        if indices.shape != excesses.shape:
            raise error.DataError("Each exceedance needs exactly one excess")
        if len(indices) == 0:
            raise error.NoExceedancesError(
                f"No observation exceeds the threshold {self.threshold!r}"
            )
        if len(indices) > self.n or indices[0] < 1 or indices[-1] > self.n:
            raise error.DataError("Exceedance positions must lie within 1..n")
        if np.any(np.diff(indices) <= 0):
            raise error.DataError("Exceedance positions must be strictly increasing")
        if np.any(excesses <= 0):
            raise error.DataError("Excesses over the threshold must be positive")
        object.__setattr__(self, "indices", _frozen(indices))
        object.__setattr__(self, "excesses", _frozen(excesses))
        if self.segments is not None:
            object.__setattr__(
                self, "segments", _frozen(np.asarray(self.segments, dtype=np.int64))
            )

    @property
    def N(self) -> int:
        """Number of exceedances."""
        return len(self.indices)

    @property
    def tail_prob(self) -> float:
        """Empirical tail probability ``N / n``."""
        return self.N / self.n

    @property
    def values(self) -> np.ndarray:
        """Observed values of the exceedances."""
        return self.excesses + self.threshold

    @property
    def offsets(self) -> np.ndarray:
        """0-based positions of the exceedances, for indexing the parent series."""
        return self.indices - 1


@dataclass(frozen=True)
class KGapSample:
    """Normalized K-gaps ``c_i = tail_prob * max(T_i - K, 0)`` with optional weights."""

    K: int
    c: np.ndarray
    weights: Optional[np.ndarray] = None
    tail_prob: Optional[float] = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=np.float64)
        if c.ndim != 1 or len(c) == 0:
            raise error.InsufficientDataError("A K-gap sample needs at least one gap")
        if np.any(~np.isfinite(c)) or np.any(c < 0):
            raise error.InvalidParameter("Normalized K-gaps must be finite and non-negative")
        object.__setattr__(self, "c", _frozen(c))
        if self.weights is not None:
            weights = np.asarray(self.weights, dtype=np.float64)
            if weights.shape != c.shape:
                raise error.InvalidParameter(
                    f"Expected {len(c)} weights, got {weights.shape}"
                )
            if np.any(~np.isfinite(weights)) or np.any(weights < 0):
                raise error.InvalidParameter("Weights must be finite and non-negative")
            if not np.any(weights > 0):
                raise error.InsufficientDataError("All K-gap weights are zero")
            object.__setattr__(self, "weights", _frozen(weights))

    def __len__(self) -> int:
        return len(self.c)

    @property
    def w(self) -> np.ndarray:
        """Weights, ones when the sample is unweighted."""
        return np.ones_like(self.c) if self.weights is None else self.weights

    @property
    def positive(self) -> np.ndarray:
        """Indicator of the positive gaps."""
        return self.c > 0

    @property
    def N_C(self) -> int:
        """Number of positive gaps."""
        return int(np.count_nonzero(self.c))

    @property
    def sum_c(self) -> float:
        """Weighted sum of the gaps."""
        return float(np.sum(self.w * self.c))

    def with_weights(self, weights: Optional[ArrayLike]) -> "KGapSample":
        return replace(self, weights=weights)


@dataclass(frozen=True)
class ClusterSet:
    """Runs-declustered exceedances: clusters of 1-based positions and their peaks."""

    threshold: float
    clusters: Tuple[np.ndarray, ...]
    peak_indices: np.ndarray
    peak_values: np.ndarray

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def sizes(self) -> np.ndarray:
        """Number of exceedances in each cluster."""
        return np.array([len(cluster) for cluster in self.clusters], dtype=np.int64)

    @property
    def peak_excesses(self) -> np.ndarray:
        return self.peak_values - self.threshold


def _as_values(series: Union[TimeSeries, ArrayLike]) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=np.float64)


def _check_run_parameter(K: int):
    if isinstance(K, bool) or not isinstance(K, (int, np.integer)) or K < 0:
        raise error.InvalidParameter(f"Run parameter K must be a non-negative integer, not {K!r}")


def empirical_quantile(series: Union[TimeSeries, ArrayLike], p: float) -> float:
    """Type-1 empirical quantile: the ``ceil(p n)``-th smallest observation.

    The convention is fixed so that threshold grids are reproducible and the number of
    exceedances of the ``p``-quantile of a tie-free sample is exactly ``n - ceil(p n)``.

    Args:
        series: Observations
        p: Probability in (0, 1)

    Returns:
        The order statistic

    Raises:
        InvalidParameter: ``p`` outside (0, 1)
        InsufficientDataError: empty sample
    """
    values = _as_values(series)
    if len(values) == 0:
        raise error.InsufficientDataError("Cannot take a quantile of an empty series")
    if not 0 < p < 1:
        raise error.InvalidParameter(f"Quantile probability must lie in (0, 1), not {p}")
    # rounding keeps 0.95 * 10000 from landing on 9500.000000000002
    rank = max(1, math.ceil(round(p * len(values), 9)))
    return float(np.partition(values, rank - 1)[rank - 1])


def exceedances(series: Union[TimeSeries, ArrayLike], u: float) -> ExceedanceRecord:
    """All and only the observations strictly above ``u``.

    Raises:
        InvalidParameter: ``u`` is not finite
        NoExceedancesError: no observation exceeds ``u``
    """
    if not np.isfinite(u):
        raise error.InvalidParameter(f"Threshold must be finite, not {u}")
    values = _as_values(series)
    offsets = np.flatnonzero(values > u)
    if len(offsets) == 0:
        raise error.NoExceedancesError(f"No observation exceeds the threshold {u!r}")
    segments = None
    if isinstance(series, TimeSeries) and series.segments is not None:
        segments = series.segments[offsets]
    return ExceedanceRecord(
        threshold=float(u),
        indices=offsets + 1,
        excesses=values[offsets] - u,
        n=len(values),
        segments=segments,
    )


def inter_exceedance_times(record: ExceedanceRecord) -> np.ndarray:
    """Inter-exceedance times ``T_i = j_{i+1} - j_i``.

    When the record carries segment labels, times between exceedances of different segments
    are dropped.

    Raises:
        InsufficientDataError: fewer than two exceedances
    """
    if record.N < 2:
        raise error.InsufficientDataError(
            f"Inter-exceedance times need at least 2 exceedances, got {record.N}"
        )
    times = np.diff(record.indices)
    if record.segments is not None:
        times = times[np.diff(record.segments) == 0]
        if len(times) == 0:
            raise error.InsufficientDataError(
                "No two exceedances fall within the same segment"
            )
    return times


def k_gaps(
    times: ArrayLike,
    K: int,
    tail_prob: float,
    weights: Optional[ArrayLike] = None,
) -> KGapSample:
    """Normalized K-gaps ``c_i = tail_prob * max(T_i - K, 0)``.

    ``K = 0`` gives the plain normalized inter-exceedance times.
    """
    _check_run_parameter(K)
    if not 0 < tail_prob <= 1:
        raise error.InvalidParameter(f"Tail probability must lie in (0, 1], not {tail_prob}")
    times = np.asarray(times, dtype=np.int64)
    if len(times) == 0:
        raise error.InsufficientDataError("K-gaps need at least one inter-exceedance time")
    if np.any(times < 1):
        raise error.InvalidParameter("Inter-exceedance times must be positive integers")
    c = tail_prob * np.maximum(times - K, 0)
    return KGapSample(K=int(K), c=c, weights=weights, tail_prob=float(tail_prob))


def record_k_gaps(record: ExceedanceRecord, K: int) -> KGapSample:
    """K-gaps of a record, normalized by its empirical tail probability ``N / n``."""
    return k_gaps(inter_exceedance_times(record), K, record.tail_prob)


def decluster_runs(record: ExceedanceRecord, K: int) -> ClusterSet:
    """Runs declustering: a new cluster starts whenever ``T_i > K``.

    Peaks are the cluster maxima, ties going to the earliest exceedance. Clusters also break
    at segment boundaries.
    """
    _check_run_parameter(K)
    starts = np.diff(record.indices) > K
    if record.segments is not None:
        starts |= np.diff(record.segments) != 0
    cut_points = np.flatnonzero(starts) + 1
    position_groups = np.split(np.arange(record.N), cut_points)
    values = record.values
    clusters, peak_indices, peak_values = [], [], []
    for group in position_groups:
        top = group[int(np.argmax(values[group]))]
        clusters.append(_frozen(record.indices[group]))
        peak_indices.append(record.indices[top])
        peak_values.append(values[top])
    return ClusterSet(
        threshold=record.threshold,
        clusters=tuple(clusters),
        peak_indices=_frozen(np.array(peak_indices, dtype=np.int64)),
        peak_values=_frozen(np.array(peak_values, dtype=np.float64)),
    )


# Calendar handling


def _require_dates(series: TimeSeries, operation: str):
    if series.timestamps is None:
        raise error.InvalidParameter(f"{operation} needs a series with calendar dates")


def noleap_day_of_year(timestamps: np.ndarray) -> np.ndarray:
    """Day of year in 1..365 on a 365-day calendar, with 29 February merged into 28 February."""
    index = pd.DatetimeIndex(np.asarray(timestamps, dtype="datetime64[D]"))
    month = index.month.to_numpy()
    day = index.day.to_numpy()
    day = np.where((month == 2) & (day == 29), 28, day)
    return _MONTH_OFFSETS[month - 1] + day


def decimal_years(timestamps: np.ndarray) -> np.ndarray:
    """Dates as fractional years, e.g. 15 July 2000 is about 2000.54."""
    index = pd.DatetimeIndex(np.asarray(timestamps, dtype="datetime64[D]"))
    length = np.where(index.is_leap_year, 366.0, 365.0)
    return index.year.to_numpy() + (index.dayofyear.to_numpy() - 1) / length


def mad(values: np.ndarray) -> float:
    """Median absolute deviation scaled by :data:`MAD_SCALE`."""
    return MAD_SCALE * float(np.median(np.abs(values - np.median(values))))


@dataclass(frozen=True)
class SeasonalCycle:
    """Smoothed day-of-year median and scaled MAD, indexed by day 1..365 at position day - 1.

    Days without observations hold NaN.
    """

    median: np.ndarray
    scale: np.ndarray
    counts: np.ndarray


def _circular_moving_median(cycle: np.ndarray, window: int) -> np.ndarray:
    half = window // 2
    padded = np.concatenate([cycle[-half:], cycle, cycle[:half]])
    windows = sliding_window_view(padded, window)
    out = np.full(len(cycle), np.nan)
    has_data = ~np.all(np.isnan(windows), axis=1)
    out[has_data] = np.nanmedian(windows[has_data], axis=1)
    return out


def seasonal_cycle(
    series: TimeSeries, smoothing_days: int = SEASONAL_SMOOTHING_DAYS
) -> SeasonalCycle:
    """Estimates the annual median and MAD cycle of a dated series.

    Each day of year gets the median and scaled MAD of its observations across years; both
    cycles are then smoothed by a circular moving median over ``smoothing_days`` days.

    Raises:
        InsufficientDataError: fewer than two distinct years, or a day observed fewer than twice
        DegenerateScaleError: a zero MAD on an observed day
    """
    _require_dates(series, "Deseasonalizing")
    years = pd.DatetimeIndex(series.timestamps).year
    if len(np.unique(years)) < 2:
        raise error.InsufficientDataError(
            "Deseasonalizing needs observations from at least 2 distinct years"
        )
    frame = pd.DataFrame(
        {"day": noleap_day_of_year(series.timestamps), "value": series.values}
    )
    grouped = frame.groupby("day")["value"]
    counts = grouped.size()
    sparse = counts[counts < 2]
    if len(sparse) > 0:
        raise error.InsufficientDataError(
            f"Day of year {int(sparse.index[0])} has fewer than 2 observations across years"
        )
    medians = np.full(365, np.nan)
    scales = np.full(365, np.nan)
    medians[counts.index.to_numpy() - 1] = grouped.median().to_numpy()
    scales[counts.index.to_numpy() - 1] = grouped.agg(
        lambda values: mad(values.to_numpy())
    ).to_numpy()

    smooth_median = _circular_moving_median(medians, smoothing_days)
    smooth_scale = _circular_moving_median(scales, smoothing_days)
    observed = counts.index.to_numpy() - 1
    if np.any(smooth_scale[observed] <= 0):
        raise error.DegenerateScaleError(
            "The seasonal median absolute deviation is zero on some day of the year"
        )
    full_counts = np.zeros(365, dtype=np.int64)
    full_counts[observed] = counts.to_numpy()
    return SeasonalCycle(
        median=_frozen(smooth_median),
        scale=_frozen(smooth_scale),
        counts=_frozen(full_counts),
    )


def deseasonalize(series: TimeSeries) -> TimeSeries:
    """Centres and scales each observation by the smoothed median and MAD of its day of year."""
    cycle = seasonal_cycle(series)
    day = noleap_day_of_year(series.timestamps) - 1
    anomalies = (series.values - cycle.median[day]) / cycle.scale[day]
    return series.with_values(anomalies, deseasonalized=True)


def detrend_moving(series: TimeSeries, window_years: float) -> TimeSeries:
    """Standardizes each observation by the median and MAD of a centred moving window.

    The window at date ``t`` holds all observations within ``t +/- window_years / 2``,
    truncated at the ends of the series.

    Raises:
        InvalidParameter: non-positive window
        InsufficientDataError: a window holds fewer than 10 observations
        DegenerateScaleError: a window has zero MAD
    """
    _require_dates(series, "Detrending")
    if not window_years > 0:
        raise error.InvalidParameter(f"Window length must be positive, not {window_years}")
    days = series.timestamps.astype(np.int64)
    half = window_years * DAYS_PER_YEAR / 2
    lows = np.searchsorted(days, days - half, side="left")
    highs = np.searchsorted(days, days + half, side="right")
    out = np.empty(series.n)
    for i, (lo, hi) in enumerate(zip(lows, highs)):
        if hi - lo < MIN_WINDOW_OBSERVATIONS:
            raise error.InsufficientDataError(
                f"The window around {series.timestamps[i]} holds {hi - lo} observations, "
                f"fewer than {MIN_WINDOW_OBSERVATIONS}"
            )
        window = series.values[lo:hi]
        scale = mad(window)
        if scale <= 0:
            raise error.DegenerateScaleError(
                f"Zero median absolute deviation in the window around {series.timestamps[i]}"
            )
        out[i] = (series.values[i] - np.median(window)) / scale
    return series.with_values(out, detrend_window_years=window_years)


def select_months(
    series: TimeSeries, months: Iterable[int], join: str = "concatenate"
) -> TimeSeries:
    """Keeps the observations falling in the given calendar months.

    With ``join="concatenate"`` successive seasons form one continuous series; with
    ``join="break"`` every run of contiguous kept observations becomes its own segment, so
    inter-exceedance times and clusters never span the dropped months.
    """
    _require_dates(series, "Selecting months")
    if join not in ("concatenate", "break"):
        raise error.InvalidParameter(
            f"Season join must be `concatenate` or `break`, not `{join}`"
        )
    months = sorted(set(int(month) for month in months))
    if not months or months[0] < 1 or months[-1] > 12:
        raise error.InvalidParameter(f"Months must lie in 1..12, got {months}")
    mask = pd.DatetimeIndex(series.timestamps).month.isin(months)
    kept = np.flatnonzero(mask)
    if len(kept) < 2:
        raise error.InsufficientDataError(
            f"Fewer than 2 observations fall in months {months}"
        )
    selected = series.take(kept)
    meta = {**series.meta, "months": months, "season_join": join}
    if join == "break":
        segments = np.concatenate([[0], np.cumsum(np.diff(kept) > 1)])
        if series.segments is not None:
            segments = segments + np.cumsum(
                np.concatenate([[0], np.diff(series.segments[kept]) > 0])
            )
        return replace(selected, segments=segments, meta=meta)
    return replace(selected, meta=meta)

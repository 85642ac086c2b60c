import itertools
import re

import numpy as np
import pandas as pd
import pytest

from potdiag import error
from potdiag.core import (
    MAD_SCALE,
    TimeSeries,
    decluster_runs,
    deseasonalize,
    detrend_moving,
    empirical_quantile,
    exceedances,
    inter_exceedance_times,
    k_gaps,
    mad,
    noleap_day_of_year,
    select_months,
)


def _daily(start, end, values=None, seed=0):
    dates = pd.date_range(start, end, freq="D").to_numpy().astype("datetime64[D]")
    if values is None:
        values = np.random.default_rng(seed).standard_normal(len(dates))
    return TimeSeries(values, timestamps=dates)


def _record(positions, n, heights=None):
    values = np.zeros(n)
    values[np.asarray(positions) - 1] = 1.0 if heights is None else heights
    return exceedances(values, 0.5)


def test_time_series_validation():
    with pytest.raises(error.InsufficientDataError):
        TimeSeries([1.0])
    with pytest.raises(error.DataError, match=re.escape("position 2 is not finite")):
        TimeSeries([1.0, np.nan, 3.0])
    with pytest.raises(error.DataError, match="strictly increasing"):
        TimeSeries(
            [1.0, 2.0],
            timestamps=np.array(["2000-01-02", "2000-01-01"], dtype="datetime64[D]"),
        )


def test_time_series_is_immutable():
    series = TimeSeries(np.arange(5.0))
    with pytest.raises(ValueError):
        series.values[0] = 10.0
    assert series.take(slice(1, 3)).values.tolist() == [1.0, 2.0]


@pytest.mark.parametrize(
    "values, p, expected", [((1, 2, 3, 4, 5), 0.5, 3), ((10, 20), 0.95, 20)]
)
def test_empirical_quantile(values, p, expected):
    assert empirical_quantile(values, p) == expected


def test_empirical_quantile_of_uniform_sample():
    draws = np.random.default_rng(1).random(1000)
    assert abs(empirical_quantile(draws, 0.9) - 0.9) < 0.05


@pytest.mark.parametrize("p", [0.0, 1.0, -0.5, 1.5])
def test_empirical_quantile_domain(p):
    with pytest.raises(error.InvalidParameter):
        empirical_quantile([1.0, 2.0, 3.0], p)


def test_exceedances():
    record = exceedances([1.0, 5.0, 2.0, 6.0], 4.0)
    np.testing.assert_array_equal(record.indices, [2, 4])
    np.testing.assert_allclose(record.excesses, [1.0, 2.0])
    assert record.N == 2
    assert record.tail_prob == 0.5
    np.testing.assert_allclose(record.values, [5.0, 6.0])


def test_exceedances_are_strict():
    values = [1.0, 3.0, 2.0]
    with pytest.raises(error.NoExceedancesError):
        exceedances(values, max(values))


def test_exceedance_count_under_quantile_convention():
    draws = np.random.default_rng(2).exponential(size=10000)
    record = exceedances(draws, empirical_quantile(draws, 0.95))
    assert record.N == 500


def test_exceedances_monotone_in_threshold():
    draws = np.random.default_rng(3).standard_normal(2000)
    low = exceedances(draws, 1.0)
    high = exceedances(draws, 1.5)
    assert set(high.indices) <= set(low.indices)


@pytest.mark.parametrize(
    "positions, n, expected", [((2, 4, 9), 9, [2, 5]), ((1, 2, 3), 3, [1, 1])]
)
def test_inter_exceedance_times(positions, n, expected):
    np.testing.assert_array_equal(inter_exceedance_times(_record(positions, n)), expected)


def test_inter_exceedance_times_need_two_exceedances():
    with pytest.raises(error.InsufficientDataError):
        inter_exceedance_times(_record([3], 5))


def test_mean_waiting_time_of_iid_series():
    draws = np.random.default_rng(4).random(200000)
    record = exceedances(draws, empirical_quantile(draws, 0.99))
    assert abs(np.mean(inter_exceedance_times(record)) - 100) < 5


def test_inter_exceedance_times_never_span_segments():
    series = TimeSeries(
        [0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0], segments=[0, 0, 0, 0, 1, 1, 1]
    )
    record = exceedances(series, 0.5)
    np.testing.assert_array_equal(record.indices, [2, 4, 5, 7])
    np.testing.assert_array_equal(inter_exceedance_times(record), [2, 2])


@pytest.mark.parametrize(
    "times, K, tail_prob, c, n_c",
    [
        ((2, 5), 1, 0.5, [0.5, 2.0], 2),
        ((1, 1), 1, 0.3, [0.0, 0.0], 0),
        ((3, 1, 7), 2, 0.1, [0.1, 0.0, 0.5], 2),
    ],
)
def test_k_gaps(times, K, tail_prob, c, n_c):
    sample = k_gaps(times, K, tail_prob)
    np.testing.assert_allclose(sample.c, c)
    assert sample.N_C == n_c
    assert sample.sum_c == pytest.approx(sum(c))


def test_k_gaps_with_zero_run_parameter_are_normalized_times():
    sample = k_gaps([3, 1, 7], 0, 0.1)
    np.testing.assert_allclose(sample.c, [0.3, 0.1, 0.7])


def test_k_gaps_monotone_in_run_parameter():
    times = np.random.default_rng(5).geometric(0.05, size=300)
    previous = k_gaps(times, 0, 0.05)
    for K in range(1, 8):
        current = k_gaps(times, K, 0.05)
        assert np.all(current.c <= previous.c)
        assert current.N_C <= previous.N_C
        previous = current


@pytest.mark.parametrize("K, tail_prob", [(-1, 0.1), (1.5, 0.1), (True, 0.1), (1, 0.0), (1, 1.5)])
def test_k_gaps_domain(K, tail_prob):
    with pytest.raises(error.InvalidParameter):
        k_gaps([2, 3], K, tail_prob)


def test_decluster_runs():
    record = _record([2, 4, 9], 9, heights=[5.0, 7.0, 6.0])
    clusters = decluster_runs(record, K=2)
    assert clusters.n_clusters == 2
    assert [cluster.tolist() for cluster in clusters.clusters] == [[2, 4], [9]]
    np.testing.assert_array_equal(clusters.peak_indices, [4, 9])
    np.testing.assert_allclose(clusters.peak_values, [7.0, 6.0])


def test_decluster_runs_ties_go_to_earliest():
    record = _record([1, 2, 3], 5, heights=[2.0, 2.0, 1.0])
    clusters = decluster_runs(record, K=1)
    np.testing.assert_array_equal(clusters.peak_indices, [1])


def test_decluster_with_zero_run_parameter_separates_every_exceedance():
    record = _record([1, 2, 3, 7], 8)
    assert decluster_runs(record, 0).n_clusters == 4


def test_cluster_count_matches_positive_gaps_exhaustively():
    for length in range(1, 13):
        for pattern in itertools.product((0.0, 1.0), repeat=length):
            if not any(pattern):
                continue
            record = exceedances(np.array(pattern), 0.5)
            for K in range(5):
                clusters = decluster_runs(record, K).n_clusters
                if record.N == 1:
                    assert clusters == 1
                    continue
                sample = k_gaps(inter_exceedance_times(record), K, record.tail_prob)
                assert clusters == sample.N_C + 1, (pattern, K)


def test_noleap_day_of_year():
    dates = np.array(
        ["2000-02-28", "2000-02-29", "2000-03-01", "2001-12-31"], dtype="datetime64[D]"
    )
    np.testing.assert_array_equal(noleap_day_of_year(dates), [59, 59, 60, 365])


def test_mad_is_scaled():
    assert mad(np.array([1.0, 2.0, 3.0, 4.0, 5.0])) == pytest.approx(MAD_SCALE)


def test_deseasonalize_removes_annual_cycle():
    dates = pd.date_range("1970-01-01", "1999-12-31", freq="D")
    rng = np.random.default_rng(6)
    cycle = 10 * np.sin(2 * np.pi * dates.dayofyear.to_numpy() / 365.25)
    series = TimeSeries(
        cycle + 2 * rng.standard_normal(len(dates)),
        timestamps=dates.to_numpy().astype("datetime64[D]"),
    )
    anomalies = deseasonalize(series).values
    assert abs(np.median(anomalies)) < 0.1
    assert abs(mad(anomalies) - 1) < 0.15


def test_deseasonalize_needs_two_years():
    with pytest.raises(error.InsufficientDataError, match="2 distinct years"):
        deseasonalize(_daily("2001-01-01", "2001-12-31"))


def test_deseasonalize_constant_series():
    dates = pd.date_range("2000-01-01", "2001-12-31", freq="D")
    with pytest.raises(error.DegenerateScaleError):
        deseasonalize(_daily("2000-01-01", "2001-12-31", values=np.ones(len(dates))))


def test_detrend_moving_with_window_covering_series():
    series = _daily("2000-01-01", "2002-12-31", seed=7)
    detrended = detrend_moving(series, window_years=1000)
    expected = (series.values - np.median(series.values)) / mad(series.values)
    np.testing.assert_allclose(detrended.values, expected)


def test_detrend_moving_removes_linear_trend():
    dates = pd.date_range("1960-01-01", "1999-12-31", freq="D")
    rng = np.random.default_rng(8)
    trend = np.linspace(0, 20, len(dates))
    series = TimeSeries(
        trend + rng.standard_normal(len(dates)),
        timestamps=dates.to_numpy().astype("datetime64[D]"),
    )
    detrended = detrend_moving(series, window_years=10).values
    block = 3653
    # windows are truncated within half a window of either end
    interior = detrended[block // 2 : -(block // 2)]
    for start in range(0, len(interior) - block + 1, block):
        assert abs(np.mean(interior[start : start + block])) < 0.1


def test_detrend_moving_constant_series():
    dates = pd.date_range("2000-01-01", "2001-12-31", freq="D")
    with pytest.raises(error.DegenerateScaleError):
        detrend_moving(_daily("2000-01-01", "2001-12-31", values=np.ones(len(dates))), 1.0)


def test_detrend_moving_needs_dates():
    with pytest.raises(error.InvalidParameter, match="calendar dates"):
        detrend_moving(TimeSeries(np.arange(20.0)), 1.0)


def test_select_months():
    series = _daily("2000-01-01", "2001-12-31")
    joined = select_months(series, [6, 7, 8])
    assert joined.n == 2 * 92
    assert joined.segments is None

    broken = select_months(series, [6, 7, 8], join="break")
    assert broken.n == 2 * 92
    np.testing.assert_array_equal(np.unique(broken.segments), [0, 1])


def test_select_months_domain():
    series = _daily("2000-01-01", "2000-12-31")
    with pytest.raises(error.InvalidParameter):
        select_months(series, [0, 13])
    with pytest.raises(error.InvalidParameter, match="Season join"):
        select_months(series, [6], join="glue")

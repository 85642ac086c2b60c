"""Information matrix test for the K-gaps model.

Under correct specification the information and the variance of the score agree,
``J(theta) = I(theta)``. The test statistic measures their empirical difference
``D_n = mean(d_i)`` against its asymptotic variance and is asymptotically chi-squared with
one degree of freedom. It is evaluated per cell of a (threshold, K) grid, optionally over
sliding time windows with a false discovery rate correction across windows.
"""
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from potdiag import error, logger
from potdiag.core import (
    DAYS_PER_YEAR,
    KGapSample,
    TimeSeries,
    empirical_quantile,
    exceedances,
    inter_exceedance_times,
    k_gaps,
)
from potdiag.kgaps import (
    ThetaEstimate,
    check_j_convention,
    information_terms,
    mle,
    score_terms,
)
from potdiag.parallel import make_pool

CHI2_CRITICAL_95 = float(stats.chi2.ppf(0.95, 1))
"""Upper 5% point of the chi-squared distribution with one degree of freedom, 3.8415."""

RELIABLE_EXCEEDANCES = 80
MIN_SERIES_LENGTH = 100
NO_WELL_SPECIFIED_REGION = "no well-specified region"


@dataclass(frozen=True)
class ImtResult:
    """Information matrix test at one (threshold, K) choice.

    ``reliable`` is false below 80 exceedances, where the chi-squared approximation tends
    to be conservative.
    """

    theta_hat: float
    D_n: float
    Dprime_n: float
    V_n: float
    T: float
    p_value: float
    n_gaps: int
    reliable: bool
    j_convention: str = "squared"

    def rejects(self, critical: float = CHI2_CRITICAL_95) -> bool:
        return self.T >= critical

    def to_dict(self) -> dict:
        return asdict(self)


def score_contribution(theta: float, c: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Score ``-I(c=0)/(1-theta) + 2 I(c>0)/theta - c`` of normalized K-gaps.

    Raises:
        DomainError: ``theta`` outside (0, 1)
    """
    if not 0 < theta < 1:
        raise error.DomainError(f"The score is only defined for 0 < theta < 1, not {theta}")
    terms = score_terms(theta, np.atleast_1d(c))
    return float(terms[0]) if np.ndim(c) == 0 else terms


def indicator_terms(
    theta: float, c: np.ndarray, j_convention: str = "squared"
) -> np.ndarray:
    """Per-gap ``d_i = 2 I(c>0)/theta^2 + c^2 - 4c/theta``, the squared score minus the information.

    Zero gaps contribute exactly zero. With ``j_convention="literal"`` the ``c^2`` term is
    replaced by ``c``.
    """
    check_j_convention(j_convention)
    c = np.asarray(c, dtype=np.float64)
    c_term = c**2 if j_convention == "squared" else c
    return np.where(c > 0, 2.0 / theta**2, 0.0) + c_term - 4.0 * c / theta


def _imt_components(
    theta: float, c: np.ndarray, j_convention: str = "squared"
) -> Tuple[float, float, float, float, float]:
    """``(D_n, D'_n, I_n, V_n, T)`` at ``theta``, with no check on the parameter domain."""
    c = np.asarray(c, dtype=np.float64)
    d = indicator_terms(theta, c, j_convention)
    d_mean = float(np.mean(d))
    d_prime = float(np.mean(np.where(c > 0, -4.0 / theta**3, 0.0) + 4.0 * c / theta**2))
    info = float(np.mean(information_terms(theta, c)))
    residual = d - d_prime / info * score_terms(theta, c)
    v = float(np.mean(residual**2))
    t = len(c) * d_mean**2 / v if v > 0 else np.inf
    return d_mean, d_prime, info, v, float(t)


def imt_statistic(
    sample: KGapSample, theta_hat: float, j_convention: str = "squared"
) -> ImtResult:
    """Information matrix test statistic and its chi-squared p-value.

    Raises:
        UndefinedTestError: boundary estimate, or constant contributions giving ``V_n = 0``
        InsufficientDataError: fewer than 2 gaps
        InvalidParameter: weighted sample
    """
    if sample.weights is not None:
        raise error.InvalidParameter("The information matrix test takes unweighted gaps")
    if not 0 < theta_hat < 1:
        raise error.UndefinedTestError(
            f"The information matrix test is undefined at the boundary estimate {theta_hat}"
        )
    if len(sample) < 2:
        raise error.InsufficientDataError(
            f"The information matrix test needs at least 2 gaps, got {len(sample)}"
        )
    d_mean, d_prime, _, v, t = _imt_components(theta_hat, sample.c, j_convention)
    scale = max(1.0, float(np.mean(indicator_terms(theta_hat, sample.c, j_convention) ** 2)))
    if v <= 1e-14 * scale:
        raise error.UndefinedTestError(
            "The information matrix test is undefined: zero variance of the contributions"
        )
    n_exceedances = len(sample) + 1
    return ImtResult(
        theta_hat=float(theta_hat),
        D_n=d_mean,
        Dprime_n=d_prime,
        V_n=v,
        T=t,
        p_value=float(stats.chi2.sf(t, 1)),
        n_gaps=len(sample),
        reliable=n_exceedances >= RELIABLE_EXCEEDANCES,
        j_convention=j_convention,
    )


# Grids


@dataclass(frozen=True)
class GridCell:
    """One (threshold probability, K) cell of a surface.

    ``flag`` is ``"ok"`` when the test was computed, otherwise the reason it is missing:
    ``no_exceedances``, ``too_few_exceedances``, ``too_few_gaps``, ``boundary``,
    ``zero_variance`` or ``failed``.
    """

    p: float
    K: int
    threshold: Optional[float] = None
    N: Optional[int] = None
    estimate: Optional[ThetaEstimate] = None
    result: Optional[ImtResult] = None
    flag: str = "ok"

    @property
    def missing(self) -> bool:
        return self.result is None

    def row(self, window_center=None) -> dict:
        """Long-format record; missing values are ``None``."""
        return {
            "window_center": window_center,
            "p": self.p,
            "K": self.K,
            "N": self.N,
            "theta": None if self.estimate is None else self.estimate.theta_hat,
            "se": None if self.estimate is None else self.estimate.se_sandwich,
            "T": None if self.result is None else self.result.T,
            "pvalue": None if self.result is None else self.result.p_value,
            "reliable": None if self.result is None else self.result.reliable,
            "flag": self.flag,
        }


@dataclass(frozen=True)
class GridSurface:
    """Information matrix test over a grid of threshold probabilities and run parameters."""

    thresholds: Tuple[float, ...]
    Ks: Tuple[int, ...]
    cells: Dict[Tuple[float, int], GridCell] = field(repr=False)
    window_center: Optional[Union[np.datetime64, int]] = None

    def cell(self, p: float, K: int) -> GridCell:
        return self.cells[(p, K)]

    def statistic_matrix(self) -> np.ndarray:
        """T per cell, rows by threshold and columns by K, NaN where missing."""
        out = np.full((len(self.thresholds), len(self.Ks)), np.nan)
        for i, p in enumerate(self.thresholds):
            for j, K in enumerate(self.Ks):
                result = self.cells[(p, K)].result
                if result is not None:
                    out[i, j] = result.T
        return out

    def rows(self) -> List[dict]:
        center = None if self.window_center is None else str(self.window_center)
        return [self.cells[(p, K)].row(center) for p in self.thresholds for K in self.Ks]


def _check_grids(p_grid: Sequence[float], K_grid: Sequence[int]) -> Tuple[tuple, tuple]:
    p_grid = tuple(sorted(set(float(p) for p in p_grid)))
    K_grid = tuple(sorted(set(K_grid)))
    if not p_grid or not K_grid:
        raise error.InvalidParameter("Threshold and K grids must be nonempty")
    if p_grid[0] <= 0 or p_grid[-1] >= 1:
        raise error.InvalidParameter(f"Threshold probabilities must lie in (0, 1), got {p_grid}")
    if any(isinstance(K, bool) or not isinstance(K, (int, np.integer)) for K in K_grid) or (
        K_grid[0] < 0
    ):
        raise error.InvalidParameter(f"Run parameters must be non-negative integers, got {K_grid}")
    return p_grid, tuple(int(K) for K in K_grid)


def evaluate_cell(
    series: TimeSeries, p: float, K: int, j_convention: str = "squared"
) -> GridCell:
    """Runs quantile, exceedances, K-gaps, estimate and test for one cell, flagging failures."""
    u = empirical_quantile(series, p)
    try:
        record = exceedances(series, u)
    except error.NoExceedancesError:
        return GridCell(p=p, K=K, threshold=u, N=0, flag="no_exceedances")
    if record.N < 2:
        return GridCell(p=p, K=K, threshold=u, N=record.N, flag="too_few_exceedances")
    try:
        times = inter_exceedance_times(record)
    except error.InsufficientDataError:
        return GridCell(p=p, K=K, threshold=u, N=record.N, flag="too_few_gaps")
    sample = k_gaps(times, K, record.tail_prob)
    estimate = mle(sample, j_convention=j_convention)
    cell = GridCell(p=p, K=K, threshold=u, N=record.N, estimate=estimate)
    if len(sample) < 2:
        return replace(cell, flag="too_few_gaps")
    if estimate.boundary:
        return replace(cell, flag="boundary")
    try:
        result = imt_statistic(sample, estimate.theta_hat, j_convention)
    except error.UndefinedTestError:
        return replace(cell, flag="zero_variance")
    except error.Error as e:
        logger.debug("Cell (%g, %d) failed: %s", p, K, e)
        return replace(cell, flag="failed")
    if not result.reliable:
        logger.debug("Cell (%g, %d) has only %d exceedances", p, K, record.N)
    return replace(cell, result=result)


def imt_grid(
    series: TimeSeries,
    p_grid: Sequence[float],
    K_grid: Sequence[int],
    j_convention: str = "squared",
    window_center: Optional[Union[np.datetime64, int]] = None,
) -> GridSurface:
    """Information matrix test surface over thresholds at the ``p_grid`` quantiles and ``K_grid``.

    Raises:
        InvalidParameter: empty or invalid grids
        InsufficientDataError: fewer than 100 observations
    """
    p_grid, K_grid = _check_grids(p_grid, K_grid)
    check_j_convention(j_convention)
    if series.n < MIN_SERIES_LENGTH:
        raise error.InsufficientDataError(
            f"An information matrix test surface needs at least {MIN_SERIES_LENGTH} "
            f"observations, got {series.n}"
        )
    cells = {
        (p, K): evaluate_cell(series, p, K, j_convention) for p in p_grid for K in K_grid
    }
    return GridSurface(
        thresholds=p_grid, Ks=K_grid, cells=cells, window_center=window_center
    )


# Sliding windows


def _dated_windows(
    series: TimeSeries,
    window_len: float,
    step: float,
    anchor: Optional[Tuple[int, int]],
) -> List[Tuple[np.datetime64, int, int]]:
    days = series.timestamps.astype(np.int64)
    start, end = float(days[0]), float(days[-1])
    half = window_len * DAYS_PER_YEAR / 2
    tolerance = 1e-6
    if anchor is None:
        centers = []
        center = start + half
        while center + half <= end + tolerance:
            centers.append(center)
            center += step * DAYS_PER_YEAR
    else:
        if float(step) != int(step):
            raise error.InvalidParameter(
                f"Anchored windows advance by whole years, not {step}"
            )
        month, day = anchor
        first = pd.Timestamp(np.datetime64(int(np.ceil(start + half - tolerance)), "D"))
        year = first.year
        if pd.Timestamp(year=year, month=month, day=day) < first:
            year += 1
        centers = []
        while True:
            anchored = pd.Timestamp(year=year, month=month, day=day)
            center = float(np.datetime64(anchored, "D").astype(np.int64))
            if center + half > end + tolerance:
                break
            centers.append(center)
            year += int(step)
    windows = []
    for center in centers:
        lo = int(np.searchsorted(days, center - half - tolerance, side="left"))
        hi = int(np.searchsorted(days, center + half + tolerance, side="right"))
        windows.append((np.datetime64(int(np.floor(center + 0.5)), "D"), lo, hi))
    return windows


def _indexed_windows(n: int, window_len: float, step: float) -> List[Tuple[int, int, int]]:
    length, stride = int(window_len), int(step)
    if length != window_len or stride != step:
        raise error.InvalidParameter(
            "Without dates, window length and step are whole numbers of observations"
        )
    return [(lo + (length + 1) // 2, lo, lo + length) for lo in range(0, n - length + 1, stride)]


def window_bounds(
    series: TimeSeries,
    window_len: float,
    step: float,
    anchor: Optional[Tuple[int, int]] = None,
) -> List[Tuple[Union[np.datetime64, int], int, int]]:
    """``(center, lo, hi)`` of every full window, ``series.values[lo:hi]`` being its content.

    With dates, ``window_len`` and ``step`` are in years of 365.25 days and centres sit at
    ``start + window_len / 2 + k * step``, or at a fixed calendar ``(month, day)`` each year
    when ``anchor`` is given. Without dates they count observations and the centre is the
    1-based position of the middle observation.

    Raises:
        InvalidParameter: non-positive window or step
        NoWindowError: no full window fits inside the series
    """
    if not window_len > 0 or not step > 0:
        raise error.InvalidParameter(
            f"Window length and step must be positive, got {window_len} and {step}"
        )
    if series.has_dates:
        windows = _dated_windows(series, window_len, step, anchor)
    else:
        windows = _indexed_windows(series.n, window_len, step)
    if not windows:
        raise error.NoWindowError(
            f"No full window of length {window_len} fits inside the series"
        )
    return windows


def _window_surface(task) -> GridSurface:
    window, p_grid, K_grid, j_convention, center = task
    return imt_grid(window, p_grid, K_grid, j_convention, window_center=center)


def sliding_window_imt(
    series: TimeSeries,
    window_len: float,
    step: float,
    p_grid: Sequence[float],
    K_grid: Sequence[int],
    j_convention: str = "squared",
    anchor: Optional[Tuple[int, int]] = None,
    workers: int = 1,
) -> List[GridSurface]:
    """One information matrix test surface per full sliding window, in time order.

    See :func:`window_bounds` for the window layout; ``workers > 1`` evaluates windows in
    worker processes.
    """
    p_grid, K_grid = _check_grids(p_grid, K_grid)
    check_j_convention(j_convention)
    windows = window_bounds(series, window_len, step, anchor)
    logger.info("Evaluating %d windows", len(windows))
    tasks = [
        (series.take(slice(lo, hi)), p_grid, K_grid, j_convention, center)
        for center, lo, hi in windows
    ]
    with make_pool(_window_surface, workers) as pool:
        return pool.map(tasks, label="windows")


# Multiple testing


def by_fdr(p_values: Sequence[float], q: float = 0.05) -> Tuple[int, ...]:
    """Benjamini-Yekutieli step-up procedure, valid under arbitrary dependence.

    Rejects the hypotheses with the ``k`` smallest p-values, ``k`` the largest rank with
    ``p_(k) <= k q / (m c(m))`` and ``c(m) = sum_{j<=m} 1/j``.

    Returns:
        Original indices of the rejected hypotheses, ascending
    """
    if not 0 < q < 1:
        raise error.InvalidParameter(f"Target false discovery rate must lie in (0, 1), not {q}")
    p_values = np.asarray(p_values, dtype=np.float64)
    if np.any(~(p_values >= 0) | ~(p_values <= 1)):
        raise error.InvalidParameter("p-values must lie in [0, 1]")
    m = len(p_values)
    if m == 0:
        return ()
    order = np.argsort(p_values, kind="stable")
    c_m = float(np.sum(1.0 / np.arange(1, m + 1)))
    critical = np.arange(1, m + 1) * q / (m * c_m)
    below = np.flatnonzero(p_values[order] <= critical)
    if len(below) == 0:
        return ()
    return tuple(sorted(int(i) for i in order[: below[-1] + 1]))


def annotate_fdr(
    surfaces: Sequence[GridSurface], q: float = 0.05
) -> Dict[Tuple[float, int], Tuple[int, ...]]:
    """Window indices rejected by :func:`by_fdr` for each (p, K) cell across windows.

    Windows where the cell is missing take no part in that cell's correction.
    """
    if not surfaces:
        return {}
    rejected = {}
    for key in surfaces[0].cells:
        available = [
            (index, surface.cells[key].result.p_value)
            for index, surface in enumerate(surfaces)
            if surface.cells[key].result is not None
        ]
        chosen = by_fdr([p for _, p in available], q)
        rejected[key] = tuple(available[i][0] for i in chosen)
    return rejected


# Parameter choice


@dataclass(frozen=True)
class ParameterChoice:
    """Recommended (p, K); all fields ``None`` when no well-specified region exists."""

    p: Optional[float]
    K: Optional[int]
    T: Optional[float]
    N: Optional[float]

    @property
    def found(self) -> bool:
        return self.p is not None

    def __str__(self) -> str:
        if not self.found:
            return NO_WELL_SPECIFIED_REGION
        return f"p={self.p:g}, K={self.K} (T={self.T:.4f})"


def _choose(
    thresholds: Sequence[float],
    Ks: Sequence[int],
    statistic: np.ndarray,
    counts: np.ndarray,
    reliable: np.ndarray,
    include_unreliable: bool,
    critical: float,
) -> ParameterChoice:
    accepted = np.isfinite(statistic) & (statistic < critical)
    rows, cols = statistic.shape
    best = None
    for i in range(rows):
        for j in range(cols):
            if not accepted[i, j] or not (reliable[i, j] or include_unreliable):
                continue
            neighbours = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
            if not all(
                accepted[a, b] for a, b in neighbours if 0 <= a < rows and 0 <= b < cols
            ):
                continue
            key = (statistic[i, j], -counts[i, j], Ks[j])
            if best is None or key < best[0]:
                best = (key, i, j)
    if best is None:
        logger.info("No cell is accepted together with its neighbours")
        return ParameterChoice(p=None, K=None, T=None, N=None)
    _, i, j = best
    return ParameterChoice(
        p=thresholds[i], K=Ks[j], T=float(statistic[i, j]), N=float(counts[i, j])
    )


def choose_params(
    surface: GridSurface,
    include_unreliable: bool = False,
    critical: float = CHI2_CRITICAL_95,
) -> ParameterChoice:
    """Cell with the smallest T among those accepted together with their 4-neighbourhood.

    A neighbour outside the grid is ignored; a missing neighbour disqualifies the cell.
    Ties go to the larger number of exceedances, then the smaller K. Unreliable cells
    (fewer than 80 exceedances) are candidates only with ``include_unreliable``.
    """
    shape = (len(surface.thresholds), len(surface.Ks))
    counts = np.zeros(shape)
    reliable = np.zeros(shape, dtype=bool)
    for i, p in enumerate(surface.thresholds):
        for j, K in enumerate(surface.Ks):
            cell = surface.cells[(p, K)]
            counts[i, j] = cell.N or 0
            reliable[i, j] = cell.result is not None and cell.result.reliable
    return _choose(
        surface.thresholds,
        surface.Ks,
        surface.statistic_matrix(),
        counts,
        reliable,
        include_unreliable,
        critical,
    )


def choose_params_across(
    surfaces: Sequence[GridSurface],
    aggregate: str = "max",
    include_unreliable: bool = False,
    critical: float = CHI2_CRITICAL_95,
) -> ParameterChoice:
    """:func:`choose_params` on T aggregated per cell over windows.

    ``aggregate="max"`` takes the largest T over windows, missing if the cell is missing in
    any window; ``"mean"`` averages the windows where the cell is present. A cell is
    reliable only if it is reliable in every window where it is present.
    """
    if aggregate not in ("max", "mean"):
        raise error.InvalidParameter(f"Aggregate must be `max` or `mean`, not `{aggregate}`")
    if not surfaces:
        raise error.InsufficientDataError("No surfaces to aggregate")
    first = surfaces[0]
    stacked = np.stack([surface.statistic_matrix() for surface in surfaces])
    if aggregate == "max":
        statistic = np.max(stacked, axis=0)
    else:
        present = np.isfinite(stacked)
        totals = np.where(present, stacked, 0.0).sum(axis=0)
        counts_present = present.sum(axis=0)
        statistic = np.where(counts_present > 0, totals / np.maximum(counts_present, 1), np.nan)
    shape = statistic.shape
    counts = np.zeros(shape)
    reliable = np.ones(shape, dtype=bool)
    for i, p in enumerate(first.thresholds):
        for j, K in enumerate(first.Ks):
            cells = [surface.cells[(p, K)] for surface in surfaces]
            counts[i, j] = np.mean([cell.N or 0 for cell in cells])
            reliable[i, j] = all(
                cell.result.reliable for cell in cells if cell.result is not None
            )
    return _choose(
        first.thresholds, first.Ks, statistic, counts, reliable, include_unreliable, critical
    )

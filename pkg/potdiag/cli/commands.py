"""Subcommand bodies of the command line frontend.

Each ``cmd_*`` takes a resolved :class:`RunConfig`, runs the library pipeline and writes its
output through :mod:`potdiag.cli.io`, to ``config.out`` or standard output.
"""
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from potdiag import error, logger
from potdiag.cli import io
from potdiag.core import (
    DAYS_PER_YEAR,
    TimeSeries,
    decluster_runs,
    deseasonalize,
    detrend_moving,
    empirical_quantile,
    exceedances,
    inter_exceedance_times,
    k_gaps,
    select_months,
)
from potdiag.gpd import (
    fit_exceedances,
    mean_residual_life,
    parameter_stability,
    qq_envelope,
    return_level_ci,
    return_level_curve,
    return_period,
)
from potdiag.imt import (
    annotate_fdr,
    choose_params,
    choose_params_across,
    imt_grid,
    imt_statistic,
    sliding_window_imt,
)
from potdiag.kgaps import J_CONVENTIONS, bootstrap_ci, intervals_estimator, mle
from potdiag.simulate import benchmark, make, resolve
from potdiag.simulate.benchmark import COLUMNS as BENCHMARK_COLUMNS
from potdiag.simulate.benchmark import ESTIMATORS

COMMANDS = ("simulate", "theta", "imt-grid", "sliding", "gpd", "bench")
FORMATS = ("csv", "json")

DEFAULT_P_GRID = tuple(round(0.95 + 0.005 * i, 10) for i in range(10))
DEFAULT_K_GRID = tuple(range(1, 13))
DEFAULT_GPD_P_GRID = tuple(round(0.90 + 0.01 * i, 10) for i in range(10))
DEFAULT_BENCH_P_GRID = (0.95, 0.96, 0.97, 0.98, 0.99)
DEFAULT_BENCH_N = 30000
DEFAULT_RETURN_PERIODS = (2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0)
DEFAULT_QQ_REPLICATES = 200

SURFACE_COLUMNS = (
    "window_center",
    "p",
    "K",
    "N",
    "theta",
    "se",
    "T",
    "pvalue",
    "reliable",
    "flag",
)
THETA_COLUMNS = (
    "p",
    "threshold",
    "K",
    "n",
    "N",
    "N_C",
    "theta",
    "se_sandwich",
    "se_naive",
    "boundary",
    "intervals_theta",
    "T",
    "pvalue",
)
TRACE_COLUMNS = ("x", "y", "lower", "upper", "p", "n", "flag")
PLOT_COLUMNS = ("x", "y", "lower", "upper")


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration of one command line run.

    Exactly one input source is used: a series file (``input``) or a registered process
    (``process`` with ``n`` and ``seed``). ``bench`` takes ``processes`` instead. Grids left
    as ``None`` resolve to the defaults of the command. ``out`` is not part of the
    configuration embedded in outputs, so re-running it elsewhere reproduces the file.
    """

    command: str
    input: Optional[str] = None
    process: Optional[str] = None
    process_params: Dict[str, Any] = field(default_factory=dict)
    n: Optional[int] = None
    burn_in: Optional[int] = None
    p: float = 0.95
    K: Optional[int] = None
    p_grid: Optional[Tuple[float, ...]] = None
    K_grid: Optional[Tuple[int, ...]] = None
    window_years: Optional[float] = None
    step_years: float = 1.0
    anchor: Optional[Tuple[int, int]] = None
    fdr_q: float = 0.05
    aggregate: str = "max"
    seed: int = 0
    format: str = "csv"
    months: Optional[Tuple[int, ...]] = None
    season_join: str = "concatenate"
    deseasonalize: bool = False
    detrend_years: Optional[float] = None
    j_convention: str = "squared"
    include_unreliable: bool = False
    obs_per_year: Optional[float] = None
    return_periods: Tuple[float, ...] = ()
    return_levels: Tuple[float, ...] = ()
    bootstrap: Optional[int] = None
    level: float = 0.95
    processes: Tuple[str, ...] = ()
    estimators: Tuple[str, ...] = ESTIMATORS
    reps: int = 200
    workers: int = 1
    out: Optional[str] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise error.InvalidParameter(
                f"Unknown command `{self.command}`, expected one of {COMMANDS}"
            )
        if self.format not in FORMATS:
            raise error.InvalidParameter(f"Format must be one of {FORMATS}, not `{self.format}`")
        if self.j_convention not in J_CONVENTIONS:
            raise error.InvalidParameter(
                f"J convention must be one of {J_CONVENTIONS}, not `{self.j_convention}`"
            )
        if not 0 < self.p < 1:
            raise error.InvalidParameter(f"Quantile must lie in (0, 1), not {self.p}")
        if self.K is not None and self.K < 0:
            raise error.InvalidParameter(f"Run parameter must be non-negative, not {self.K}")
        if self.workers < 1:
            raise error.InvalidParameter(f"At least one worker is needed, not {self.workers}")

        if self.command == "simulate":
            if self.process is None or self.n is None:
                raise error.InvalidParameter("`simulate` needs a process and a series length")
        elif self.command == "bench":
            if not self.processes:
                raise error.InvalidParameter("`bench` needs at least one process")
        elif (self.input is None) == (self.process is None):
            raise error.InvalidParameter(
                "Give exactly one input source: a series file or a process"
            )
        elif self.process is not None and self.n is None:
            raise error.InvalidParameter("A simulated input needs a series length")
        if self.command == "sliding" and self.window_years is None:
            raise error.InvalidParameter("`sliding` needs a window length")

        if self.p_grid is None:
            default = {"gpd": DEFAULT_GPD_P_GRID, "bench": DEFAULT_BENCH_P_GRID}
            object.__setattr__(self, "p_grid", default.get(self.command, DEFAULT_P_GRID))
        if self.K_grid is None:
            object.__setattr__(self, "K_grid", DEFAULT_K_GRID)
        if self.command == "bench" and self.n is None:
            object.__setattr__(self, "n", DEFAULT_BENCH_N)
        if not self.p_grid or not self.K_grid:
            raise error.InvalidParameter("Threshold and K grids must be nonempty")

    def to_dict(self) -> Dict[str, Any]:
        """Configuration embedded in every output, without the output path."""
        config = asdict(self)
        del config["out"]
        return config

    @classmethod
    def from_dict(cls, config: Dict[str, Any], out: Optional[str] = None) -> "RunConfig":
        """Rebuilds a configuration embedded by :meth:`to_dict`, writing to ``out``."""
        known = {f.name for f in fields(cls)}
        unknown = set(config) - known
        if unknown:
            raise error.InvalidParameter(f"Unknown configuration fields {sorted(unknown)}")
        kwargs = {
            name: tuple(value) if isinstance(value, list) else value
            for name, value in config.items()
        }
        return cls(**{**kwargs, "out": out})


# Input


def load_series(config: RunConfig) -> TimeSeries:
    """Reads or simulates the input series and applies the requested preprocessing."""
    if config.input is not None:
        series = io.read_series(config.input)
    else:
        series = make(
            config.process,
            n=config.n,
            seed=config.seed,
            burn_in=config.burn_in,
            **config.process_params,
        )
    logger.info("Loaded %d observations", series.n)
    if config.deseasonalize:
        series = deseasonalize(series)
    if config.detrend_years is not None:
        series = detrend_moving(series, config.detrend_years)
    if config.months:
        series = select_months(series, config.months, config.season_join)
        logger.info("Kept %d observations in months %s", series.n, list(config.months))
    return series


def _emit(config: RunConfig, text: str, path: Optional[str] = None):
    path = path or config.out
    if path is None:
        sys.stdout.write(text)
    else:
        io.atomic_write(path, text)
        logger.info("Wrote %s", path)


def _sibling(out: str, suffix: str) -> str:
    path = Path(out)
    return str(path.with_name(path.stem + suffix))


# Commands


def cmd_simulate(config: RunConfig) -> int:
    """Writes a simulated series and, next to a file output, its specification as JSON."""
    process_spec = resolve(
        config.process,
        n=config.n,
        seed=config.seed,
        burn_in=config.burn_in,
        **config.process_params,
    )
    series = make(process_spec)
    rows = io.series_rows(series)
    columns = ("value",) if series.timestamps is None else ("date", "value")
    if config.format == "json":
        payload = {"spec": process_spec.to_dict(), "rows": rows}
        _emit(config, io.format_json(payload, config.to_dict()))
        return 0
    _emit(config, io.format_csv(rows, columns, config.to_dict(), float_format="%.17g"))
    if config.out is not None:
        io.write_json(
            _sibling(config.out, ".meta.json"),
            {"spec": process_spec.to_dict()},
            config.to_dict(),
        )
    return 0


def cmd_theta(config: RunConfig) -> int:
    """Extremal index at one threshold and run parameter, with the test at that choice."""
    series = load_series(config)
    K = 1 if config.K is None else config.K
    u = empirical_quantile(series, config.p)
    record = exceedances(series, u)
    times = inter_exceedance_times(record)
    sample = k_gaps(times, K, record.tail_prob)
    estimate = mle(sample, j_convention=config.j_convention, threshold_prob=config.p)

    intervals = None
    try:
        intervals = intervals_estimator(times)
    except error.InsufficientDataError as e:
        logger.debug("No intervals estimate: %s", e)

    imt, imt_flag = None, "ok"
    try:
        imt = imt_statistic(sample, estimate.theta_hat, config.j_convention)
    except (error.UndefinedTestError, error.InsufficientDataError) as e:
        imt_flag = str(e)
        logger.info("Information matrix test not available: %s", e)

    bootstrap = None
    if config.bootstrap is not None:
        bootstrap = bootstrap_ci(
            record, K, B=config.bootstrap, level=config.level, seed=config.seed
        )

    if config.format == "csv":
        row = {
            "p": config.p,
            "threshold": u,
            "K": K,
            "n": series.n,
            "N": record.N,
            "N_C": estimate.n_c,
            "theta": estimate.theta_hat,
            "se_sandwich": estimate.se_sandwich,
            "se_naive": estimate.se_naive,
            "boundary": estimate.boundary,
            "intervals_theta": intervals,
            "T": None if imt is None else imt.T,
            "pvalue": None if imt is None else imt.p_value,
        }
        _emit(config, io.format_csv([row], THETA_COLUMNS, config.to_dict()))
        return 0

    interval = estimate.confidence_interval(config.level)
    payload = {
        "p": config.p,
        "threshold": u,
        "K": K,
        "n": series.n,
        "N": record.N,
        "N_C": estimate.n_c,
        "estimate": estimate.to_dict(),
        "confidence_interval": None
        if interval is None
        else {"level": config.level, "lower": interval[0], "upper": interval[1]},
        "intervals_estimate": intervals,
        "imt": None if imt is None else imt.to_dict(),
        "imt_flag": imt_flag,
        "bootstrap": None if bootstrap is None else bootstrap.to_dict(),
    }
    _emit(config, io.format_json(payload, config.to_dict()))
    return 0


def _choice_dict(choice) -> Dict[str, Any]:
    return {**asdict(choice), "found": choice.found, "message": str(choice)}


def cmd_imt_grid(config: RunConfig) -> int:
    """Long-format information matrix test surface over the threshold and K grids."""
    series = load_series(config)
    surface = imt_grid(series, config.p_grid, config.K_grid, config.j_convention)
    choice = choose_params(surface, include_unreliable=config.include_unreliable)
    logger.info("Recommended choice: %s", choice)
    if config.format == "csv":
        rows = [{**row, "window_center": "none"} for row in surface.rows()]
        _emit(config, io.format_csv(rows, SURFACE_COLUMNS, config.to_dict()))
    else:
        payload = {"cells": surface.rows(), "recommendation": _choice_dict(choice)}
        _emit(config, io.format_json(payload, config.to_dict()))
    return 0


def _sliding_rows(surfaces, rejected) -> List[Dict[str, Any]]:
    rows = []
    for index, surface in enumerate(surfaces):
        for row in surface.rows():
            key = (row["p"], row["K"])
            flagged = None
            if not surface.cells[key].missing:
                flagged = index in rejected[key]
            rows.append({**row, "fdr_rejected": flagged})
    return rows


def cmd_sliding(config: RunConfig) -> int:
    """Surfaces over sliding windows, each cell flagged by the FDR correction across windows."""
    series = load_series(config)
    surfaces = sliding_window_imt(
        series,
        config.window_years,
        config.step_years,
        config.p_grid,
        config.K_grid,
        j_convention=config.j_convention,
        anchor=config.anchor,
        workers=config.workers,
    )
    rejected = annotate_fdr(surfaces, q=config.fdr_q)
    rows = _sliding_rows(surfaces, rejected)
    if config.format == "csv":
        columns = SURFACE_COLUMNS + ("fdr_rejected",)
        _emit(config, io.format_csv(rows, columns, config.to_dict()))
    else:
        choice = choose_params_across(
            surfaces,
            aggregate=config.aggregate,
            include_unreliable=config.include_unreliable,
        )
        payload = {
            "windows": len(surfaces),
            "cells": rows,
            "recommendation": _choice_dict(choice),
        }
        _emit(config, io.format_json(payload, config.to_dict()))
    return 0


def observations_per_year(series: TimeSeries, obs_per_year: Optional[float]) -> float:
    """Given frequency, else the observed one of a dated series, else daily."""
    if obs_per_year is not None:
        return obs_per_year
    if series.has_dates:
        days = series.timestamps.astype(np.int64)
        span = int(days[-1] - days[0])
        return series.n / ((span + 1) / DAYS_PER_YEAR)
    logger.warn(
        "No observation frequency given, assuming %g observations per year", DAYS_PER_YEAR
    )
    return DAYS_PER_YEAR


def _trace_rows(trace) -> List[Dict[str, Any]]:
    return [
        {
            "x": point.threshold,
            "y": point.value,
            "lower": point.lower,
            "upper": point.upper,
            "p": point.p,
            "n": point.n,
            "flag": point.flag,
        }
        for point in trace
    ]


def cmd_gpd(config: RunConfig) -> int:
    """Generalized Pareto fit report, return levels and periods, and diagnostic tables.

    The report is JSON. With an output path, plot-ready diagnostics are written next to it:
    ``<stem>.mrl.csv``, ``<stem>.shape.csv``, ``<stem>.scale.csv``, ``<stem>.qq.csv`` and
    ``<stem>.return_levels.csv``.
    """
    series = load_series(config)
    u = empirical_quantile(series, config.p)
    record = exceedances(series, u)
    fit = fit_exceedances(series, u, K=config.K, strict=True)
    frequency = observations_per_year(series, config.obs_per_year)

    levels = [
        return_level_ci(fit, frequency, period, config.level).to_dict()
        for period in config.return_periods
    ]
    periods = [
        {"level": x, "period": return_period(fit, frequency, x)} for x in config.return_levels
    ]

    diagnostics = {}
    if config.out is not None:
        excesses = record.excesses
        if config.K is not None:
            excesses = decluster_runs(record, config.K).peak_excesses
        mrl = mean_residual_life(series, config.p_grid, config.level)
        shapes, scales = parameter_stability(series, config.p_grid, config.K, config.level)
        qq = qq_envelope(
            fit,
            excesses,
            B=config.bootstrap or DEFAULT_QQ_REPLICATES,
            seed=config.seed,
            level=config.level,
        )
        curve = return_level_curve(fit, frequency, DEFAULT_RETURN_PERIODS, config.level)
        tables = {
            "mrl": (_trace_rows(mrl), TRACE_COLUMNS),
            "shape": (_trace_rows(shapes), TRACE_COLUMNS),
            "scale": (_trace_rows(scales), TRACE_COLUMNS),
            "qq": (qq.rows(), PLOT_COLUMNS),
            "return_levels": (
                [
                    {"x": e.period, "y": e.level, "lower": e.lower, "upper": e.upper}
                    for e in curve
                ],
                PLOT_COLUMNS,
            ),
        }
        for name, (rows, columns) in tables.items():
            path = _sibling(config.out, f".{name}.csv")
            io.write_csv(path, rows, columns, config.to_dict())
            diagnostics[name] = Path(path).name
    else:
        logger.info("No output path given, diagnostic tables are not written")

    payload = {
        "p": config.p,
        "threshold": u,
        "K": config.K,
        "obs_per_year": frequency,
        "fit": fit.to_dict(),
        "modified_scale": fit.sigma - fit.xi * u,
        "upper_endpoint": fit.upper_endpoint,
        "return_levels": levels,
        "return_periods": periods,
        "diagnostics": diagnostics,
    }
    _emit(config, io.format_json(payload, config.to_dict()))
    return 0


def cmd_bench(config: RunConfig) -> int:
    """Benchmark table of the estimators over the requested processes."""
    K_map = None if config.K is None else {name: config.K for name in config.processes}
    parameters = None
    if config.process_params:
        parameters = {name: dict(config.process_params) for name in config.processes}
    rows = benchmark(
        config.processes,
        estimators=config.estimators,
        reps=config.reps,
        n=config.n,
        p_grid=config.p_grid,
        K_map=K_map,
        seed=config.seed,
        workers=config.workers,
        parameters=parameters,
        burn_in=config.burn_in,
    )
    records = [row.to_dict() for row in rows]
    if config.format == "csv":
        _emit(config, io.format_csv(records, BENCHMARK_COLUMNS, config.to_dict()))
    else:
        _emit(config, io.format_json({"rows": records}, config.to_dict()))
    return 0


handlers = {
    "simulate": cmd_simulate,
    "theta": cmd_theta,
    "imt-grid": cmd_imt_grid,
    "sliding": cmd_sliding,
    "gpd": cmd_gpd,
    "bench": cmd_bench,
}


def run(config: RunConfig) -> int:
    logger.debug("Running %s with %s", config.command, config.to_dict())
    return handlers[config.command](config)

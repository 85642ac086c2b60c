"""Command line frontend: ``potdiag <command> [options]``.

Exit codes: 0 success, 2 usage errors, 3 data and parsing errors, 4 numerical failures.
"""
import argparse
import math
from typing import List, Optional, Sequence, Tuple

from potdiag import error, logger
from potdiag.cli import io
from potdiag.cli.commands import ESTIMATORS, RunConfig, run
from potdiag.version import VERSION

# Parameters of the registered processes, settable from the command line
PROCESS_PARAMETERS = {
    "phi": float,
    "phi1": float,
    "phi2": float,
    "alpha": float,
    "r": float,
    "d": float,
    "truncation": int,
    "theta": float,
    "tail_prob": float,
    "xi": float,
    "sigma": float,
}


def probability_grid(text: str) -> Tuple[float, ...]:
    """Parses ``a:b:step`` (inclusive) or a single probability."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return (float(parts[0]),)
        if len(parts) != 3:
            raise ValueError
        start, stop, step = (float(part) for part in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected `a:b:step`, got `{text}`")
    if not step > 0:
        raise argparse.ArgumentTypeError(f"grid step must be positive, got `{text}`")
    if stop < start:
        raise argparse.ArgumentTypeError(f"empty grid `{text}`")
    count = math.floor((stop - start) / step + 1e-9) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


def integer_grid(text: str) -> Tuple[int, ...]:
    """Parses ``a:b`` (inclusive) or a single integer."""
    parts = text.split(":")
    try:
        bounds = [int(part) for part in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected `a:b`, got `{text}`")
    if len(bounds) == 1:
        return (bounds[0],)
    if len(bounds) != 2:
        raise argparse.ArgumentTypeError(f"expected `a:b`, got `{text}`")
    if bounds[1] < bounds[0]:
        raise argparse.ArgumentTypeError(f"empty grid `{text}`")
    return tuple(range(bounds[0], bounds[1] + 1))


def month_list(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(month) for month in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated months, got `{text}`")


def calendar_day(text: str) -> Tuple[int, int]:
    """Parses ``MM-DD``."""
    try:
        month, day = (int(part) for part in text.split("-"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected `MM-DD`, got `{text}`")
    return month, day


def _add_output(parser: argparse.ArgumentParser, formats: bool = True):
    parser.add_argument("--out", help="output file, standard output if omitted")
    if formats:
        parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--seed", type=int, default=0, help="master seed")


def _add_process_parameters(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("process parameters")
    for name, kind in PROCESS_PARAMETERS.items():
        group.add_argument(f"--{name.replace('_', '-')}", dest=f"param_{name}", type=kind)
    group.add_argument("--burn-in", type=int, help="discarded warm-up length")


def _add_input(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("input")
    group.add_argument("--input", help="series file with header `value` or `date,value`")
    group.add_argument("--process", help="simulate the input from a registered process")
    group.add_argument("--n", type=int, help="length of a simulated input")
    group.add_argument("--months", type=month_list, help="keep these months, e.g. 6,7,8")
    group.add_argument(
        "--season-join",
        choices=("concatenate", "break"),
        default="concatenate",
        help="join successive seasons into one series, or break gaps between them",
    )
    group.add_argument("--deseasonalize", action="store_true")
    group.add_argument(
        "--detrend-years", type=float, help="standardize by a moving median and MAD"
    )
    _add_process_parameters(parser)


def _add_method(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--literal-appendix-J",
        dest="literal_j",
        action="store_true",
        help="use the literal information estimate instead of the squared score terms",
    )


def _add_grids(parser: argparse.ArgumentParser):
    parser.add_argument("--p-grid", type=probability_grid, help="threshold quantiles a:b:step")
    parser.add_argument("--K-grid", type=integer_grid, help="run parameters a:b")
    parser.add_argument(
        "--include-unreliable",
        action="store_true",
        help="let cells with fewer than 80 exceedances be recommended",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="potdiag",
        description="Extremal index estimation and threshold diagnostics for peaks over "
        "threshold analysis.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("-q", "--quiet", action="store_true")
    subparsers = parser.add_subparsers(dest="command", required=True)

    simulate = subparsers.add_parser("simulate", help="simulate a registered process")
    simulate.add_argument("process")
    simulate.add_argument("--n", type=int, required=True)
    _add_process_parameters(simulate)
    _add_output(simulate)

    theta = subparsers.add_parser("theta", help="K-gaps estimate of the extremal index")
    _add_input(theta)
    theta.add_argument("--quantile", "-p", dest="p", type=float, default=0.95)
    theta.add_argument("--K", type=int, default=1)
    theta.add_argument("--bootstrap", type=int, help="bootstrap replicates for an interval")
    theta.add_argument("--level", type=float, default=0.95)
    _add_method(theta)
    _add_output(theta)

    grid = subparsers.add_parser("imt-grid", help="information matrix test surface")
    _add_input(grid)
    _add_grids(grid)
    _add_method(grid)
    _add_output(grid)

    sliding = subparsers.add_parser("sliding", help="surfaces over sliding windows")
    _add_input(sliding)
    _add_grids(sliding)
    sliding.add_argument(
        "--window-years",
        type=float,
        required=True,
        help="window length, in observations for undated series",
    )
    sliding.add_argument("--step-years", type=float, default=1.0)
    sliding.add_argument("--anchor", type=calendar_day, help="centre windows on this MM-DD")
    sliding.add_argument("--fdr-q", type=float, default=0.05)
    sliding.add_argument("--aggregate", choices=("max", "mean"), default="max")
    sliding.add_argument("--workers", type=int, default=1)
    _add_method(sliding)
    _add_output(sliding)

    gpd = subparsers.add_parser("gpd", help="generalized Pareto fit and diagnostics")
    _add_input(gpd)
    gpd.add_argument("--quantile", "-p", dest="p", type=float, default=0.95)
    gpd.add_argument("--K", type=int, help="fit cluster peaks declustered with this K")
    gpd.add_argument("--p-grid", type=probability_grid, help="diagnostic thresholds a:b:step")
    gpd.add_argument("--obs-per-year", type=float)
    gpd.add_argument("--return-period", dest="return_periods", type=float, action="append")
    gpd.add_argument("--return-level", dest="return_levels", type=float, action="append")
    gpd.add_argument("--bootstrap", type=int, help="resamples of the quantile plot envelope")
    gpd.add_argument("--level", type=float, default=0.95)
    _add_output(gpd, formats=False)

    bench = subparsers.add_parser("bench", help="benchmark extremal index estimators")
    bench.add_argument("processes", nargs="+")
    bench.add_argument("--estimators", nargs="+", default=list(ESTIMATORS))
    bench.add_argument("--reps", type=int, default=200)
    bench.add_argument("--n", type=int)
    bench.add_argument("--p-grid", type=probability_grid)
    bench.add_argument("--K", type=int, help="run parameter for every process")
    bench.add_argument("--workers", type=int, default=1)
    _add_process_parameters(bench)
    _add_output(bench)

    replay = subparsers.add_parser("replay", help="re-run the configuration embedded in a file")
    replay.add_argument("file")
    replay.add_argument("--out")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Resolves parsed arguments into a run configuration."""
    if args.command == "replay":
        return RunConfig.from_dict(io.read_config(args.file), out=args.out)
    options = vars(args)
    params = {
        name: options[f"param_{name}"]
        for name in PROCESS_PARAMETERS
        if options.get(f"param_{name}") is not None
    }
    fields = {
        name: value
        for name, value in options.items()
        if not name.startswith("param_")
        and name not in ("verbose", "quiet", "literal_j")
        and value is not None
    }
    for name in ("return_periods", "return_levels", "estimators", "processes"):
        if name in fields:
            fields[name] = tuple(fields[name])
    fields["j_convention"] = "literal" if options.get("literal_j") else "squared"
    return RunConfig(process_params=params, **fields)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the ``potdiag`` console script, returning the exit code."""
    args = build_parser().parse_args(None if argv is None else list(argv))
    logger.set_level(logger.level_from_verbosity(args.verbose, args.quiet))
    try:
        return run(config_from_args(args))
    except error.Error as e:
        logger.error("%s", e)
        return e.exit_code


__all__: List[str] = ["main", "build_parser", "config_from_args", "RunConfig"]

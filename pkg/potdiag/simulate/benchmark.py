"""Monte Carlo comparison of extremal index estimators on processes with known index."""
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from potdiag import error, logger
from potdiag.core import empirical_quantile, exceedances, inter_exceedance_times, k_gaps
from potdiag.kgaps import intervals_estimator, mle
from potdiag.parallel import make_pool
from potdiag.simulate.registration import ProcessSpec, resolve
from potdiag.utils import seeding

ESTIMATORS = ("kgaps_mle", "intervals")
COLUMNS = (
    "process",
    "estimator",
    "quantile",
    "K",
    "n",
    "reps",
    "median_rel_bias",
    "rmse",
    "seed",
)
MIN_REPLICATIONS = 10


@dataclass(frozen=True)
class BenchmarkRow:
    """Accuracy of one estimator on one process at one threshold quantile.

    ``median_rel_bias`` is ``median(theta_hat) / theta - 1`` and ``rmse`` the root mean
    squared error against the known index, both over the replications where the estimate
    exists; ``failures`` counts the others.
    """

    process: str
    estimator: str
    quantile: float
    K: int
    n: int
    reps: int
    median_rel_bias: float
    rmse: float
    seed: int
    failures: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _estimate(times: np.ndarray, tail_prob: float, estimator: str, K: int) -> float:
    if estimator == "kgaps_mle":
        return mle(k_gaps(times, K, tail_prob)).theta_hat
    return intervals_estimator(times)


def _replicate(task) -> Dict[str, List[float]]:
    """Estimates for every estimator and quantile on one simulated series."""
    spec_, p_grid, K, estimators = task
    series = spec_.make()
    out = {estimator: [] for estimator in estimators}
    for p in p_grid:
        try:
            record = exceedances(series, empirical_quantile(series, p))
            times = inter_exceedance_times(record)
        except error.InsufficientDataError:
            for estimator in estimators:
                out[estimator].append(np.nan)
            continue
        for estimator in estimators:
            try:
                out[estimator].append(_estimate(times, record.tail_prob, estimator, K))
            except error.Error:
                out[estimator].append(np.nan)
    return out


def _check_estimators(estimators: Sequence[str]):
    unknown = [name for name in estimators if name not in ESTIMATORS]
    if unknown or not estimators:
        raise error.InvalidParameter(
            f"Unknown estimators {unknown}, expected a nonempty subset of {ESTIMATORS}"
        )


def benchmark(
    processes: Sequence[str],
    estimators: Sequence[str] = ESTIMATORS,
    reps: int = 200,
    n: int = 30000,
    p_grid: Sequence[float] = (0.95, 0.96, 0.97, 0.98, 0.99),
    K_map: Optional[Dict[str, int]] = None,
    seed: int = 0,
    workers: int = 1,
    parameters: Optional[Dict[str, dict]] = None,
    burn_in: Optional[int] = None,
) -> List[BenchmarkRow]:
    """Median relative bias and RMSE of the estimators over ``reps`` simulated series.

    Replication ``r`` of every process is simulated with seed ``seed + r``. K defaults to
    the registered run parameter of each process.

    Args:
        processes: Names or aliases of registered processes with a known extremal index
        estimators: Subset of ``("kgaps_mle", "intervals")``
        reps: Number of replications, at least 10
        n: Series length
        p_grid: Threshold quantiles
        K_map: Run parameter per process, overriding the registered one
        seed: Master seed
        workers: Number of worker processes
        parameters: Parameter overrides per process
        burn_in: Discarded warm-up length of every simulated series, the process default if
            ``None``

    Raises:
        InvalidParameter: fewer than 10 replications, unknown estimator, or a process
            without a known extremal index
    """
    if reps < MIN_REPLICATIONS:
        raise error.InvalidParameter(
            f"At least {MIN_REPLICATIONS} replications are needed, not {reps}"
        )
    _check_estimators(estimators)
    if not p_grid:
        raise error.InvalidParameter("The quantile grid must be nonempty")
    K_map, parameters = K_map or {}, parameters or {}
    seeds = seeding.replicate_seeds(seed, reps)

    rows = []
    for name in processes:
        base: ProcessSpec = resolve(name, n=n, **parameters.get(name, {}))
        theta = base.theta
        if theta is None:
            raise error.InvalidParameter(f"Process {base.kind} has no known extremal index")
        K = K_map.get(name, K_map.get(base.kind, base.run_parameter))
        if K is None:
            raise error.InvalidParameter(f"No run parameter given for {base.kind}")
        logger.info(
            "Benchmarking %s (theta=%g, K=%d) over %d replications",
            base.kind,
            theta,
            K,
            reps,
        )
        overrides = parameters.get(name, {})
        tasks = [
            (
                resolve(name, n=n, seed=s, burn_in=burn_in, **overrides),
                tuple(p_grid),
                K,
                tuple(estimators),
            )
            for s in seeds
        ]
        with make_pool(_replicate, workers) as pool:
            results = pool.map(tasks, label=base.kind)
        for estimator in estimators:
            estimates = np.array([result[estimator] for result in results])
            for column, p in enumerate(p_grid):
                values = estimates[:, column]
                finite = values[np.isfinite(values)]
                failures = reps - len(finite)
                if failures:
                    logger.warn(
                        "%s: %d of %d %s estimates failed at quantile %g",
                        base.kind,
                        failures,
                        reps,
                        estimator,
                        p,
                    )
                if len(finite):
                    bias = float(np.median(finite) / theta - 1)
                    rmse = float(np.sqrt(np.mean((finite - theta) ** 2)))
                else:
                    bias = rmse = np.nan
                rows.append(
                    BenchmarkRow(
                        process=base.kind,
                        estimator=estimator,
                        quantile=float(p),
                        K=int(K),
                        n=n,
                        reps=reps,
                        median_rel_bias=bias,
                        rmse=rmse,
                        seed=seed,
                        failures=failures,
                    )
                )
    return rows

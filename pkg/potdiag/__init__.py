"""Root __init__ of the potdiag module setting the __all__ of potdiag modules."""
# isort: skip_file

from potdiag import error
from potdiag.version import VERSION as __version__

from potdiag.core import (
    TimeSeries,
    ExceedanceRecord,
    KGapSample,
    ClusterSet,
    empirical_quantile,
    exceedances,
    inter_exceedance_times,
    k_gaps,
    decluster_runs,
)
from potdiag.kgaps import ThetaEstimate, mle, bootstrap_ci, intervals_estimator
from potdiag.imt import ImtResult, imt_grid, sliding_window_imt, by_fdr, choose_params
from potdiag.gpd import GpdFit, gpd_fit, return_level, return_period
from potdiag.simulate import make, spec, register, benchmark
from potdiag import logger

__all__ = [
    "TimeSeries",
    "ExceedanceRecord",
    "KGapSample",
    "ThetaEstimate",
    "ImtResult",
    "GpdFit",
    "mle",
    "imt_grid",
    "gpd_fit",
    "make",
    "spec",
    "register",
]

"""Simulated processes with known extremal index, exact samplers and the benchmark harness."""
from potdiag.simulate.registration import (
    ProcessSpec,
    alias_registry,
    make,
    register,
    registry,
    resolve,
    spec,
)

# Processes
# ----------------------------------------

register(
    kind="ar1_cauchy",
    entry_point="potdiag.simulate.processes:ar1_cauchy",
    extremal_index="potdiag.simulate.processes:ar1_cauchy_extremal_index",
    run_parameter=1,
    aliases=("ar1",),
    phi=0.7,
)

register(
    kind="ar2_pareto",
    entry_point="potdiag.simulate.processes:ar2_pareto",
    extremal_index="potdiag.simulate.processes:ar2_pareto_extremal_index",
    run_parameter=6,
    aliases=("ar2",),
    phi1=0.95,
    phi2=-0.89,
    alpha=2.0,
)

register(
    kind="logistic_markov",
    entry_point="potdiag.simulate.processes:logistic_markov",
    extremal_index="potdiag.simulate.processes:logistic_markov_extremal_index",
    run_parameter=5,
    aliases=("markov",),
    r=2.0,
)

register(
    kind="farima",
    entry_point="potdiag.simulate.processes:farima",
    extremal_index="potdiag.simulate.processes:farima_extremal_index",
    run_parameter=1,
    phi=0.5,
    d=0.0,
    truncation=5000,
)

# Limiting models
# ----------------------------------------

register(
    kind="exact_mixture",
    entry_point="potdiag.simulate.processes:exact_mixture",
    extremal_index="potdiag.simulate.processes:exact_mixture_extremal_index",
    run_parameter=1,
    theta=0.5,
    tail_prob=0.02,
)

register(
    kind="exact_gpd",
    entry_point="potdiag.simulate.processes:exact_gpd",
    extremal_index=1.0,
    run_parameter=0,
    xi=0.27,
    sigma=14.8,
)

from potdiag.simulate.benchmark import benchmark  # noqa: E402
from potdiag.simulate.processes import (  # noqa: E402
    exact_gpd_sample,
    exact_mixture_gaps,
    farima_weights,
)

"""Tests that `potdiag.simulate.register` and `make` work as expected."""
import re

import numpy as np
import pytest

import potdiag
from potdiag import error
from potdiag.simulate import alias_registry, register, registry, resolve, spec


def constant_series(n, level=1.0, seed=None, burn_in=0):
    return potdiag.TimeSeries(np.full(n, level) + np.arange(n) * 1e-3)


@pytest.fixture(scope="function")
def register_testing_process():
    """Registers a testing process with an alias."""
    register(
        kind="testing_constant",
        entry_point="tests.simulate.test_registration:constant_series",
        extremal_index=1.0,
        run_parameter=0,
        aliases=("testing_alias",),
        level=2.0,
    )

    yield

    del registry["testing_constant"]
    del alias_registry["testing_alias"]


def test_registered_processes():
    assert {
        "ar1_cauchy",
        "ar2_pareto",
        "logistic_markov",
        "farima",
        "exact_mixture",
        "exact_gpd",
    } <= set(registry)
    assert alias_registry["ar1"] == "ar1_cauchy"
    assert alias_registry["ar2"] == "ar2_pareto"


@pytest.mark.parametrize(
    "kind, theta",
    [("ar1", 0.3), ("ar2", 0.25), ("markov", 0.328), ("exact_gpd", 1.0), ("farima", 1.0)],
)
def test_known_extremal_index(kind, theta):
    assert spec(kind).theta == pytest.approx(theta)


def test_extremal_index_depends_on_parameters():
    assert resolve("ar1", phi=0.4).theta == pytest.approx(0.6)
    assert resolve("farima", d=0.3).theta is None
    assert resolve("exact_mixture", theta=0.2).theta == 0.2


def test_register_and_make(register_testing_process):
    series = potdiag.make("testing_alias", n=5)
    assert len(series) == 5
    np.testing.assert_allclose(series.values[0], 2.0)
    assert series.meta["kind"] == "testing_constant"
    assert series.meta["parameters"] == {"level": 2.0}


def test_make_overrides_parameters(register_testing_process):
    series = potdiag.make("testing_constant", n=3, level=-1.0)
    np.testing.assert_allclose(series.values[0], -1.0)


def test_conflicting_alias(register_testing_process):
    with pytest.raises(error.RegistrationError):
        register(kind="other", entry_point="no-entry-point", aliases=("testing_alias",))


def test_unknown_process_suggests_a_name():
    with pytest.raises(
        error.NameNotFound,
        match=re.escape("Process ar1_cauchi doesn't exist. Did you mean: `ar1_cauchy`?"),
    ):
        potdiag.make("ar1_cauchi", n=10)


def test_unknown_parameter():
    with pytest.raises(error.InvalidParameter, match="takes parameters"):
        potdiag.make("ar1", n=10, theta=0.5)


def test_spec_needs_a_length():
    with pytest.raises(error.InvalidParameter, match="No series length"):
        resolve("ar1").make()
    with pytest.raises(error.InvalidParameter):
        resolve("ar1", n=0)


def test_make_from_spec():
    process = resolve("ar2", n=100, seed=3)
    np.testing.assert_array_equal(potdiag.make(process).values, process.make().values)


def test_meta_is_resolved_configuration():
    meta = potdiag.make("ar1", n=50, seed=9).meta
    assert meta["kind"] == "ar1_cauchy"
    assert meta["seed"] == 9
    assert meta["parameters"] == {"phi": 0.7}
    assert meta["extremal_index"] == pytest.approx(0.3)
    assert meta["generator"] == "PCG64"

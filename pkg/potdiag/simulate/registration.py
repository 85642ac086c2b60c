"""Registry of simulated processes: specifications, registration and creation by name."""
import difflib
import importlib
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Optional, Sequence, Union

from potdiag import error, logger
from potdiag.core import TimeSeries
from potdiag.utils import seeding

ExtremalIndex = Union[None, float, str, Callable[..., Optional[float]]]


def load(name: str) -> Callable:
    """Loads a generator from its ``"module:function"`` entry point."""
    mod_name, attr_name = name.split(":")
    mod = importlib.import_module(mod_name)
    return getattr(mod, attr_name)


@dataclass(frozen=True)
class ProcessSpec:
    """A specification for simulating a series with :func:`make`.

    * kind: The registered name of the process
    * entry_point: Generator ``fn(n, seed=..., burn_in=..., **parameters) -> TimeSeries``
    * extremal_index: Known extremal index, or a function of the parameters (or its entry
      point) returning it
      (``None`` where no value is known)
    * run_parameter: Run parameter K recommended for the process
    * n: Series length
    * seed: Seed of the generator
    * burn_in: Discarded warm-up length, the generator's default if ``None``
    * kwargs: Process parameters passed to the generator
    """

    kind: str
    entry_point: Union[Callable, str] = field(repr=False)
    extremal_index: ExtremalIndex = field(default=None, repr=False)
    run_parameter: Optional[int] = None
    n: Optional[int] = None
    seed: Optional[int] = None
    burn_in: Optional[int] = None
    kwargs: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.n is not None and (
            isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1
        ):
            raise error.InvalidParameter(
                f"Series length must be a positive integer, not {self.n}"
            )
        if self.burn_in is not None and self.burn_in < 0:
            raise error.InvalidParameter(f"Burn-in must be non-negative, not {self.burn_in}")
        if self.seed is not None:
            seeding.np_random(self.seed)

    @property
    def theta(self) -> Optional[float]:
        """Extremal index of the process at these parameters, ``None`` if unknown."""
        if isinstance(self.extremal_index, str):
            return load(self.extremal_index)(**self.kwargs)
        if callable(self.extremal_index):
            return self.extremal_index(**self.kwargs)
        return self.extremal_index

    def make(self) -> TimeSeries:
        """Simulates the series this specification describes."""
        if self.n is None:
            raise error.InvalidParameter(f"No series length given for `{self.kind}`")
        creator = self.entry_point if callable(self.entry_point) else load(self.entry_point)
        kwargs = dict(self.kwargs)
        if self.burn_in is not None:
            kwargs["burn_in"] = self.burn_in
        series = creator(self.n, seed=self.seed, **kwargs)
        return series.with_values(series.values, **self.to_dict())

    def to_dict(self) -> Dict[str, Any]:
        """Resolved configuration, JSON serializable."""
        return {
            "kind": self.kind,
            "n": self.n,
            "seed": self.seed,
            "burn_in": self.burn_in,
            "parameters": dict(sorted(self.kwargs.items())),
            "extremal_index": self.theta,
            "run_parameter": self.run_parameter,
            "generator": seeding.ALGORITHM,
        }


# Global registry of processes. Meant to be accessed through `register` and `make`
registry: Dict[str, ProcessSpec] = {}
alias_registry: Dict[str, str] = {}


def _resolve_name(kind: str) -> str:
    """Maps an alias onto its process kind, suggesting the closest name for unknown kinds."""
    kind = alias_registry.get(kind, kind)
    if kind in registry:
        return kind
    names = list(registry) + list(alias_registry)
    suggestion = difflib.get_close_matches(kind, names, n=1)
    suggestion_msg = f" Did you mean: `{suggestion[0]}`?" if suggestion else ""
    raise error.NameNotFound(f"Process {kind} doesn't exist.{suggestion_msg}")


def register(
    kind: str,
    entry_point: Union[Callable, str],
    extremal_index: ExtremalIndex = None,
    run_parameter: Optional[int] = None,
    aliases: Sequence[str] = (),
    **kwargs,
):
    """Register a process.

    Args:
        kind: The process name
        entry_point: The generator creating series of the process
        extremal_index: Known extremal index or a function of the parameters giving it
        run_parameter: Recommended run parameter K
        aliases: Short names resolving to ``kind``
        **kwargs: Default process parameters passed to the generator
    """
    global registry
    for alias in aliases:
        target = alias_registry.get(alias, kind)
        if alias in registry or target != kind:
            raise error.RegistrationError(
                f"Alias `{alias}` of `{kind}` already names another process"
            )
    if kind in alias_registry:
        raise error.RegistrationError(f"`{kind}` is already an alias of another process")
    new_spec = ProcessSpec(
        kind=kind,
        entry_point=entry_point,
        extremal_index=extremal_index,
        run_parameter=run_parameter,
        kwargs=kwargs,
    )
    if kind in registry:
        logger.warn("Overriding process %s already in registry.", kind)
    registry[kind] = new_spec
    for alias in aliases:
        alias_registry[alias] = kind


def resolve(
    kind: str,
    n: Optional[int] = None,
    seed: Optional[int] = None,
    burn_in: Optional[int] = None,
    **kwargs,
) -> ProcessSpec:
    """Registered specification of ``kind`` with the length, seed and parameter overrides applied.

    Raises:
        NameNotFound: unknown process kind
        InvalidParameter: a parameter the process does not take
    """
    spec_ = registry[_resolve_name(kind)]
    unknown = set(kwargs) - set(spec_.kwargs)
    if unknown:
        raise error.InvalidParameter(
            f"Process {spec_.kind} takes parameters {sorted(spec_.kwargs)}, not {sorted(unknown)}"
        )
    return replace(
        spec_, n=n, seed=seed, burn_in=burn_in, kwargs={**spec_.kwargs, **kwargs}
    )


def make(
    kind: Union[str, ProcessSpec],
    n: Optional[int] = None,
    seed: Optional[int] = None,
    burn_in: Optional[int] = None,
    **kwargs,
) -> TimeSeries:
    """Simulate a series of a registered process.

    To find all available processes use `potdiag.simulate.registry.keys()`.

    Example::

        >>> import potdiag
        >>> series = potdiag.make("ar1", n=8000, seed=7)
        >>> len(series)
        8000

    Args:
        kind: Name or alias of the process, or a resolved specification
        n: Series length
        seed: Seed of the generator
        burn_in: Discarded warm-up length, the process default if ``None``
        kwargs: Process parameters overriding the registered defaults

    Returns:
        The series, its ``meta`` holding the resolved specification.
    """
    if isinstance(kind, ProcessSpec):
        return kind.make()
    return resolve(kind, n=n, seed=seed, burn_in=burn_in, **kwargs).make()


def spec(kind: str) -> ProcessSpec:
    """Retrieve the registered specification of a process by name or alias."""
    return registry[_resolve_name(kind)]

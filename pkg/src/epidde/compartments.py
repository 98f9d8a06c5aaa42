"""Compartment layouts and vector fields for the six model variants.

Every variant is described as a set of flows between compartments:

* one bilinear infection flow ``beta * S * X / N`` out of S, where X is the
  transmitting compartment (I, or M for the mild/critical variants), and
* linear flows ``rate * Z[src]`` from ``src`` to ``dst``.

Each flow is subtracted from its source and added to its destination, so the
components of the derivative always sum to zero.

    SIR     S -> I (via I);  I -> R (delta)
    SEIR    S -> E (via I);  E -> I (gamma); I -> R (delta)
    SIRD    SIR  + I -> D (epsilon)
    SEIRD   SEIR + I -> D (epsilon)
    SMCRD   S -> M (via M);  M -> C (alpha); M -> R (delta1);
            C -> R (delta2); C -> D (epsilon)
    SEMCRD  SMCRD with S -> E (via M); E -> M (gamma)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import InfeasibleInitializationError, StructuralError

RATE_NAMES = ("beta_star", "gamma", "delta", "delta1", "delta2", "alpha", "epsilon")


@dataclass(frozen=True)
class ModelVariant:
    tag: str
    labels: tuple[str, ...]
    rates: tuple[str, ...]  # active rates other than beta_star, in canonical order
    infection_target: str
    transmitter: str
    flows: tuple[tuple[str, str, str], ...]  # (rate, src, dst)

    @property
    def dim(self) -> int:
        return len(self.labels)

    @property
    def active_rates(self) -> tuple[str, ...]:
        return ("beta_star",) + self.rates

    @property
    def split_infected(self) -> bool:
        """True when observed infections correspond to M + C."""
        return "M" in self.labels

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def __str__(self) -> str:
        return self.tag


def _variant(tag, labels, flows, target, transmitter):
    order = {name: k for k, name in enumerate(RATE_NAMES)}
    rates = tuple(sorted({f[0] for f in flows}, key=order.__getitem__))
    return ModelVariant(tag, tuple(labels), rates, target, transmitter, tuple(flows))


VARIANTS: dict[str, ModelVariant] = {
    v.tag: v
    for v in (
        _variant("SIR", "SIR", [("delta", "I", "R")], "I", "I"),
        _variant("SEIR", "SEIR", [("gamma", "E", "I"), ("delta", "I", "R")], "E", "I"),
        _variant("SIRD", "SIRD", [("delta", "I", "R"), ("epsilon", "I", "D")], "I", "I"),
        _variant(
            "SEIRD",
            "SEIRD",
            [("gamma", "E", "I"), ("delta", "I", "R"), ("epsilon", "I", "D")],
            "E",
            "I",
        ),
        _variant(
            "SMCRD",
            "SMCRD",
            [
                ("alpha", "M", "C"),
                ("delta1", "M", "R"),
                ("delta2", "C", "R"),
                ("epsilon", "C", "D"),
            ],
            "M",
            "M",
        ),
        _variant(
            "SEMCRD",
            "SEMCRD",
            [
                ("gamma", "E", "M"),
                ("alpha", "M", "C"),
                ("delta1", "M", "R"),
                ("delta2", "C", "R"),
                ("epsilon", "C", "D"),
            ],
            "E",
            "M",
        ),
    )
}


def get_variant(tag: str | ModelVariant) -> ModelVariant:
    if isinstance(tag, ModelVariant):
        return tag
    try:
        return VARIANTS[tag.upper()]
    except KeyError:
        raise StructuralError(f"unknown model variant {tag!r}; expected one of {sorted(VARIANTS)}") from None


@dataclass(frozen=True)
class CompartmentState:
    values: np.ndarray
    day_index: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise StructuralError("compartment state must be a vector")
        if np.any(values < 0):
            raise ValueError(f"compartment counts must be non-negative, got {values}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def as_dict(self, variant: ModelVariant) -> dict[str, float]:
        _check_dim(variant, self.values)
        return dict(zip(variant.labels, self.values.tolist()))


@dataclass(frozen=True)
class RateParameters:
    """Epidemiological rates (1/day) and population. Rates not used by a variant stay ``None``."""

    population: float
    beta_star: float | None = None
    gamma: float | None = None
    delta: float | None = None
    delta1: float | None = None
    delta2: float | None = None
    alpha: float | None = None
    epsilon: float | None = None

    def __post_init__(self):
        if not self.population > 0:
            raise ValueError("population must be positive")
        for name in RATE_NAMES:
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"rate {name}={value} outside [0, 1]")

    @classmethod
    def for_variant(cls, variant: ModelVariant | str, population: float, **rates: float) -> "RateParameters":
        variant = get_variant(variant)
        missing = set(variant.active_rates) - set(rates)
        extra = set(rates) - set(variant.active_rates)
        if missing or extra:
            raise StructuralError(
                f"{variant.tag} takes rates {variant.active_rates}; missing {sorted(missing)}, unexpected {sorted(extra)}"
            )
        return cls(population=float(population), **{k: float(v) for k, v in rates.items()})

    def active(self, variant: ModelVariant) -> dict[str, float]:
        out = {}
        for name in variant.active_rates:
            value = getattr(self, name)
            if value is None:
                raise StructuralError(f"{variant.tag} needs rate {name!r}")
            out[name] = value
        return out

    def rate_vector(self, variant: ModelVariant) -> np.ndarray:
        """Active rates except beta_star, in ``variant.rates`` order."""
        active = self.active(variant)
        return np.array([active[name] for name in variant.rates], dtype=float)

    def to_dict(self) -> dict[str, float]:
        out = {"population": self.population}
        out.update({name: getattr(self, name) for name in RATE_NAMES if getattr(self, name) is not None})
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, float]) -> "RateParameters":
        return cls(**{k: float(v) for k, v in data.items() if k in RATE_NAMES or k == "population"})


# Starting rates for fitting. beta_star is a mid-range guess, override per region.
DEFAULT_INITIAL_RATES = {
    "beta_star": 0.3,
    "gamma": 0.15,
    "delta": 0.07,
    "delta1": 0.07,
    "delta2": 0.03,
    "alpha": 0.15,
    "epsilon": 0.03,
}


def default_parameters(variant: ModelVariant | str, population: float, **overrides: float) -> RateParameters:
    variant = get_variant(variant)
    rates = {name: DEFAULT_INITIAL_RATES[name] for name in variant.active_rates}
    rates.update(overrides)
    return RateParameters.for_variant(variant, population, **rates)


def _check_dim(variant: ModelVariant, values: np.ndarray) -> None:
    if values.shape != (variant.dim,):
        raise StructuralError(
            f"{variant.tag} state needs {variant.dim} compartments {variant.labels}, got shape {values.shape}"
        )


class _Layout:
    """Integer indices for one variant, precomputed for the inner loops."""

    def __init__(self, variant: ModelVariant):
        self.dim = variant.dim
        self.s = variant.index("S")
        self.target = variant.index(variant.infection_target)
        self.transmitter = variant.index(variant.transmitter)
        self.flows = tuple(
            (variant.rates.index(rate), variant.index(src), variant.index(dst)) for rate, src, dst in variant.flows
        )


_LAYOUTS = {tag: _Layout(v) for tag, v in VARIANTS.items()}


def layout(variant: ModelVariant) -> _Layout:
    return _LAYOUTS[variant.tag]


def rhs(variant: ModelVariant, z: np.ndarray, rates: np.ndarray, beta_eff, population) -> np.ndarray:
    """Raw vector field on arrays. ``rates`` follows ``variant.rates`` order.

    The dtype of ``z`` is kept, so extended-precision inputs stay extended.
    """
    lay = layout(variant)
    dz = np.zeros_like(z)
    force = beta_eff * z[lay.s] * z[lay.transmitter] / population
    dz[lay.s] -= force
    dz[lay.target] += force
    for r, src, dst in lay.flows:
        flow = rates[r] * z[src]
        dz[src] -= flow
        dz[dst] += flow
    return dz


def rhs_vjp(variant: ModelVariant, z, rates, beta_eff, population, adj):
    """Pull ``adj`` (dL/d rhs) back through :func:`rhs`.

    Returns ``(dL/dz, dL/drates, dL/dbeta_eff)``.
    """
    lay = layout(variant)
    gz = np.zeros_like(z)
    grates = np.zeros_like(rates)
    s, x = lay.s, lay.transmitter
    c = adj[lay.target] - adj[s]
    gz[s] += c * beta_eff * z[x] / population
    gz[x] += c * beta_eff * z[s] / population
    gbeta = c * z[s] * z[x] / population
    for r, src, dst in lay.flows:
        c = adj[dst] - adj[src]
        gz[src] += c * rates[r]
        grates[r] += c * z[src]
    return gz, grates, gbeta


def vector_field(
    variant: ModelVariant | str,
    state: CompartmentState,
    params: RateParameters,
    beta_eff: float,
) -> np.ndarray:
    """dZ/dt in people/day, using ``beta_eff`` (not ``beta_star``) as the infection rate."""
    variant = get_variant(variant)
    _check_dim(variant, state.values)
    if beta_eff < 0:
        raise ValueError("beta_eff must be non-negative")
    return rhs(variant, state.values, params.rate_vector(variant), float(beta_eff), params.population)


def initial_state(
    variant: ModelVariant | str,
    first_observation: tuple[float, float, float],
    params: RateParameters,
    split_config: Mapping[str, float] | None = None,
) -> CompartmentState:
    """Build Z0 from the first observed (active infected, recovered, deaths).

    ``split_config`` may carry ``e0_ratio`` (E0 = e0_ratio * I0, default 1.0)
    and ``mild_fraction`` (M0 share of I0, default 0.9). Variants without D
    fold the observed deaths into R.
    """
    variant = get_variant(variant)
    split_config = dict(split_config or {})
    e0_ratio = float(split_config.get("e0_ratio", 1.0))
    mild = float(split_config.get("mild_fraction", 0.9))
    i0, r0, d0 = (float(v) for v in first_observation)
    n = params.population
    if min(i0, r0, d0) < 0:
        raise ValueError("initial observations must be non-negative")
    if i0 + r0 + d0 > n:
        raise InfeasibleInitializationError(f"I0 + R0 + D0 = {i0 + r0 + d0} exceeds population {n}")
    if e0_ratio < 0 or not 0.0 <= mild <= 1.0:
        raise ValueError("e0_ratio must be >= 0 and mild_fraction in [0, 1]")

    values = dict.fromkeys(variant.labels, 0.0)
    if "E" in values:
        values["E"] = e0_ratio * i0
    if variant.split_infected:
        values["M"] = mild * i0
        values["C"] = (1.0 - mild) * i0
    else:
        values["I"] = i0
    if "D" in values:
        values["R"], values["D"] = r0, d0
    else:
        values["R"] = r0 + d0
    s0 = n - sum(v for k, v in values.items() if k != "S")
    if s0 < 0:
        raise InfeasibleInitializationError(f"initial susceptible pool would be negative ({s0})")
    values["S"] = s0
    return CompartmentState(np.array([values[k] for k in variant.labels]), day_index=0)


def model_observables(variant: ModelVariant, z: np.ndarray) -> dict[str, np.ndarray]:
    """Model counterparts of the observed series, keyed I/R/D. Works on (..., dim) arrays.

    I is M + C for the mild/critical variants. Variants without D have no D key.
    """
    if variant.split_infected:
        infected = z[..., variant.index("M")] + z[..., variant.index("C")]
    else:
        infected = z[..., variant.index("I")]
    out = {"I": infected, "R": z[..., variant.index("R")]}
    if "D" in variant.labels:
        out["D"] = z[..., variant.index("D")]
    return out


def data_observables(variant: ModelVariant, infected, recovered, deaths) -> dict[str, np.ndarray]:
    """Observed series matched to :func:`model_observables`; deaths fold into R when D is absent."""
    infected, recovered, deaths = (np.asarray(a, dtype=float) for a in (infected, recovered, deaths))
    if "D" in variant.labels:
        return {"I": infected, "R": recovered, "D": deaths}
    return {"I": infected, "R": recovered + deaths}

"""Fixed-step Euler / RK4 integration over day-indexed time."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .compartments import CompartmentState, ModelVariant, RateParameters, get_variant, rhs
from .errors import NumericError, StructuralError

RateProvider = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "rk4"
    substeps_per_day: int = 1

    def __post_init__(self):
        scheme = self.scheme.lower()
        if scheme not in ("euler", "rk4"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        object.__setattr__(self, "scheme", scheme)
        if int(self.substeps_per_day) != self.substeps_per_day or self.substeps_per_day < 1:
            raise ValueError("substeps_per_day must be a positive integer")

    @property
    def step_size(self) -> float:
        return 1.0 / self.substeps_per_day

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "substeps_per_day": self.substeps_per_day}


TRAINING_INTEGRATOR = IntegratorConfig("euler", 4)


@dataclass(frozen=True)
class ClampEvent:
    day: int
    substep: int
    compartment: str
    value: float


@dataclass(frozen=True)
class Trajectory:
    variant: ModelVariant
    values: np.ndarray  # (T + 1, dim), row t is day t
    clamp_events: tuple[ClampEvent, ...] = field(default=())

    @property
    def days(self) -> int:
        return self.values.shape[0] - 1

    @property
    def states(self) -> list[CompartmentState]:
        return [CompartmentState(row, day_index=t) for t, row in enumerate(self.values)]

    def column(self, label: str) -> np.ndarray:
        return self.values[:, self.variant.index(label)]


def constant_rate(beta: float) -> RateProvider:
    return lambda z: beta


def _check_finite(variant, dz, day):
    if not np.all(np.isfinite(dz)):
        bad = int(np.flatnonzero(~np.isfinite(dz))[0])
        raise NumericError("non-finite derivative", compartment=variant.labels[bad], day=day)


def _clamp(variant, z, day, substep, events):
    neg = z < 0
    if np.any(neg):
        for k in np.flatnonzero(neg):
            events.append(ClampEvent(day, substep, variant.labels[k], float(z[k])))
        z = np.where(neg, 0.0, z).astype(z.dtype)
    return z


def euler_update(variant, z, rates, beta_eff, population, dt, day=None):
    """Unclamped Euler update on raw arrays. Shared with the gradient code."""
    dz = rhs(variant, z, rates, beta_eff, population)
    _check_finite(variant, dz, day)
    return z + dt * dz


def rk4_update(variant, z, rates, provider, population, dt, day=None):
    k1 = rhs(variant, z, rates, provider(z), population)
    _check_finite(variant, k1, day)
    z2 = z + 0.5 * dt * k1
    k2 = rhs(variant, z2, rates, provider(z2), population)
    _check_finite(variant, k2, day)
    z3 = z + 0.5 * dt * k2
    k3 = rhs(variant, z3, rates, provider(z3), population)
    _check_finite(variant, k3, day)
    z4 = z + dt * k3
    k4 = rhs(variant, z4, rates, provider(z4), population)
    _check_finite(variant, k4, day)
    return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _state_values(variant, state):
    values = state.values if isinstance(state, CompartmentState) else np.asarray(state, dtype=float)
    if values.shape != (variant.dim,):
        raise StructuralError(f"{variant.tag} state needs {variant.dim} compartments, got {values.shape}")
    return values


def euler_step(
    variant: ModelVariant | str,
    state: CompartmentState,
    params: RateParameters,
    beta_eff: float,
    dt: float,
) -> CompartmentState:
    """One clamped Euler step ``Z + dt * F(Z)``."""
    variant = get_variant(variant)
    if not dt > 0:
        raise ValueError("dt must be positive")
    z = _state_values(variant, state)
    nxt = euler_update(variant, z, params.rate_vector(variant), float(beta_eff), params.population, dt)
    nxt = _clamp(variant, nxt, state.day_index, 0, [])
    return CompartmentState(nxt, state.day_index)


def rk4_step(
    variant: ModelVariant | str,
    state: CompartmentState,
    params: RateParameters,
    beta_eff_provider: RateProvider | float,
    dt: float,
) -> CompartmentState:
    """One clamped classical RK4 step; the provider is queried at every stage state."""
    variant = get_variant(variant)
    if not dt > 0:
        raise ValueError("dt must be positive")
    provider = beta_eff_provider if callable(beta_eff_provider) else constant_rate(float(beta_eff_provider))
    z = _state_values(variant, state)
    nxt = rk4_update(variant, z, params.rate_vector(variant), provider, params.population, dt)
    nxt = _clamp(variant, nxt, state.day_index, 0, [])
    return CompartmentState(nxt, state.day_index)


def integrate(
    variant: ModelVariant | str,
    initial: CompartmentState | np.ndarray,
    params: RateParameters,
    effect_provider: RateProvider | float,
    days: int,
    config: IntegratorConfig = IntegratorConfig(),
) -> Trajectory:
    """Integrate ``days`` days, recording the state at every integer day (T + 1 rows)."""
    variant = get_variant(variant)
    if days < 0:
        raise ValueError("days must be >= 0")
    provider = effect_provider if callable(effect_provider) else constant_rate(float(effect_provider))
    z = _state_values(variant, initial)
    rates = params.rate_vector(variant)
    n = params.population
    dt = config.step_size
    out = np.empty((days + 1, variant.dim), dtype=z.dtype)
    out[0] = z
    events: list[ClampEvent] = []
    for day in range(days):
        for sub in range(config.substeps_per_day):
            if config.scheme == "euler":
                z = euler_update(variant, z, rates, provider(z), n, dt, day)
            else:
                z = rk4_update(variant, z, rates, provider, n, dt, day)
            z = _clamp(variant, z, day, sub, events)
        out[day + 1] = z
    return Trajectory(variant, out, tuple(events))

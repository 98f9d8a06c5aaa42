"""Noise-free synthetic series generated by the package's own integrator."""

from __future__ import annotations

import datetime as dt
from typing import Callable

import numpy as np

from .compartments import RateParameters, get_variant, initial_state, model_observables
from .data import ObservedSeries
from .integrator import TRAINING_INTEGRATOR, IntegratorConfig, _clamp, euler_update, integrate, rk4_update


def series_from_values(variant, values: np.ndarray, population: float, start=dt.date(2020, 1, 1), region_id="synthetic") -> ObservedSeries:
    obs = model_observables(variant, values)
    infected, recovered = obs["I"], obs["R"]
    deaths = obs.get("D", np.zeros_like(recovered))
    dates = tuple(start + dt.timedelta(days=k) for k in range(values.shape[0]))
    return ObservedSeries(region_id, dates, infected + recovered + deaths, recovered, deaths, population)


def constant_rate_series(
    variant,
    params: RateParameters,
    days: int,
    infected0: float,
    config: IntegratorConfig = TRAINING_INTEGRATOR,
    split_config=None,
) -> ObservedSeries:
    """``days`` observed days (day 0 .. days - 1) of a constant-rate epidemic."""
    variant = get_variant(variant)
    z0 = initial_state(variant, (infected0, 0.0, 0.0), params, split_config)
    traj = integrate(variant, z0, params, params.beta_star, days - 1, config)
    return series_from_values(variant, traj.values, params.population)


def time_varying_series(
    variant,
    params: RateParameters,
    beta: Callable[[float], float],
    days: int,
    infected0: float,
    config: IntegratorConfig = TRAINING_INTEGRATOR,
    split_config=None,
) -> ObservedSeries:
    """Like :func:`constant_rate_series` with the infection rate given as a function of time (days)."""
    variant = get_variant(variant)
    z = initial_state(variant, (infected0, 0.0, 0.0), params, split_config).values
    rates = params.rate_vector(variant)
    dt_ = config.step_size
    out = [z]
    for day in range(days - 1):
        for sub in range(config.substeps_per_day):
            t = day + sub * dt_
            if config.scheme == "euler":
                z = euler_update(variant, z, rates, beta(t), params.population, dt_, day)
            else:
                # the provider sees states only, so RK4 holds beta at the step start
                z = rk4_update(variant, z, rates, lambda _z, b=beta(t): b, params.population, dt_, day)
            z = _clamp(variant, z, day, sub, [])
        out.append(z)
    return series_from_values(variant, np.array(out), params.population)


def declining_beta(total_days: int, beta0: float = 0.4) -> Callable[[float], float]:
    """``beta0 * (1 - t / (2 T))``: falls linearly to half its start over ``T`` days."""
    return lambda t: beta0 * (1.0 - t / (2.0 * total_days))

"""Fitting drivers: effect-network training, constant-rate gradient fit, Nelder-Mead baseline."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping

import numpy as np

from ..compartments import (
    CompartmentState,
    ModelVariant,
    RateParameters,
    data_observables,
    default_parameters,
    get_variant,
    initial_state,
    model_observables,
)
from ..data import ObservedSeries, split_train_test
from ..effect_net import DEFAULT_HIDDEN, EffectNetwork, effect_rate, init_network, layer_sizes_for
from ..errors import DivergenceError, NumericError
from ..integrator import TRAINING_INTEGRATOR, IntegratorConfig, Trajectory, integrate
from ..metrics import EvaluationReport, evaluate
from .gradients import FitProblem
from .loss import observed_targets, trajectory_loss
from .optim import AdamState, adam_step, lr_schedule, nelder_mead

METHODS = ("dde", "const-grad", "nelder-mead")


@dataclass(frozen=True)
class TrainingConfig:
    method: str = "dde"
    iterations: int = 5000
    learning_rate: float = 1e-3
    decay_factor: float = 0.95
    decay_every: int = 400
    seed: int = 0
    integrator: IntegratorConfig = TRAINING_INTEGRATOR
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    holdout_days: int = 20
    initial_rates: Mapping[str, float] = field(default_factory=dict)
    nm_xatol: float = 1e-8
    nm_fatol: float = 1e-8

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.holdout_days < 0:
            raise ValueError("holdout_days must be >= 0")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "initial_rates", dict(self.initial_rates))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["integrator"] = self.integrator.to_dict()
        out["hidden"] = list(self.hidden)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrainingConfig":
        data = dict(data)
        data["integrator"] = IntegratorConfig(**data["integrator"])
        data["hidden"] = tuple(data["hidden"])
        return cls(**data)


@dataclass(frozen=True)
class FitResult:
    variant: ModelVariant
    method: str
    params: RateParameters
    network: EffectNetwork | None
    loss_curve: np.ndarray
    final_loss: float
    best_iteration: int
    initial_state: CompartmentState
    train_days: int
    trajectory: Trajectory  # covers train + test days
    metrics: EvaluationReport | None
    config: TrainingConfig
    seed: int
    wall_time: float = 0.0
    start_date: str | None = None
    region_id: str | None = None
    split_config: Mapping[str, float] = field(default_factory=dict)

    @property
    def test_days(self) -> int:
        return self.trajectory.days + 1 - self.train_days

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.tag,
            "method": self.method,
            "params": self.params.to_dict(),
            "network": None if self.network is None else self.network.to_dict(),
            "loss_curve": [float(x) for x in self.loss_curve],
            "final_loss": self.final_loss,
            "best_iteration": self.best_iteration,
            "initial_state": self.initial_state.values.tolist(),
            "labels": list(self.variant.labels),
            "train_days": self.train_days,
            "test_days": self.test_days,
            "trajectory": self.trajectory.values.tolist(),
            "metrics": None if self.metrics is None else self.metrics.to_dict(),
            "config": self.config.to_dict(),
            "seed": self.seed,
            "wall_time": self.wall_time,
            "start_date": self.start_date,
            "region_id": self.region_id,
            "split_config": dict(self.split_config),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "FitResult":
        variant = get_variant(data["variant"])
        network = None if data.get("network") is None else EffectNetwork.from_dict(data["network"])
        metrics = None if data.get("metrics") is None else EvaluationReport.from_dict(data["metrics"])
        return cls(
            variant=variant,
            method=data["method"],
            params=RateParameters.from_dict(data["params"]),
            network=network,
            loss_curve=np.array(data["loss_curve"], dtype=float),
            final_loss=float(data["final_loss"]),
            best_iteration=int(data["best_iteration"]),
            initial_state=CompartmentState(np.array(data["initial_state"], dtype=float)),
            train_days=int(data["train_days"]),
            trajectory=Trajectory(variant, np.array(data["trajectory"], dtype=float)),
            metrics=metrics,
            config=TrainingConfig.from_dict(data["config"]),
            seed=int(data["seed"]),
            wall_time=float(data.get("wall_time", 0.0)),
            start_date=data.get("start_date"),
            region_id=data.get("region_id"),
            split_config=dict(data.get("split_config") or {}),
        )


# shared helpers ----------------------------------------------------------------


def rate_provider(params: RateParameters, network: EffectNetwork | None):
    if network is None:
        return params.beta_star
    return effect_rate(network, params.beta_star, params.population)


def simulate(
    variant: ModelVariant,
    initial: CompartmentState,
    params: RateParameters,
    network: EffectNetwork | None,
    days: int,
    config: IntegratorConfig,
) -> Trajectory:
    return integrate(variant, initial, params, rate_provider(params, network), days, config)


def holdout_report(variant: ModelVariant, trajectory: Trajectory, observed: ObservedSeries, train_days: int) -> EvaluationReport | None:
    """Metrics over days ``train_days .. len(observed) - 1`` of a full-window trajectory."""
    total = len(observed)
    if total <= train_days:
        return None
    pred = model_observables(variant, trajectory.values[train_days:total])
    obs = data_observables(
        variant,
        observed.active_infected[train_days:],
        observed.recovered[train_days:],
        observed.deaths[train_days:],
    )
    return evaluate(pred, obs, (train_days, total - 1))


def _setup(observed: ObservedSeries, variant, config: TrainingConfig, split_config):
    variant = get_variant(variant)
    if config.holdout_days:
        train = split_train_test(observed, config.holdout_days).train
    else:
        train = observed
    params0 = default_parameters(variant, observed.population, **config.initial_rates)
    z0 = initial_state(
        variant,
        (train.active_infected[0], train.recovered[0], train.deaths[0]),
        params0,
        split_config,
    )
    return variant, train, params0, z0


def _finish(variant, observed, train, params, network, z0, curve, final_loss, best_it, config, split_config, t0):
    traj = simulate(variant, z0, params, network, len(observed) - 1, config.integrator)
    return FitResult(
        variant=variant,
        method=config.method,
        params=params,
        network=network,
        loss_curve=np.asarray(curve, dtype=float),
        final_loss=float(final_loss),
        best_iteration=int(best_it),
        initial_state=z0,
        train_days=len(train),
        trajectory=traj,
        metrics=holdout_report(variant, traj, observed, len(train)),
        config=config,
        seed=config.seed,
        wall_time=time.perf_counter() - t0,
        start_date=observed.dates[0].isoformat(),
        region_id=observed.region_id,
        split_config=dict(split_config or {}),
    )


def _adam_fit(observed, variant, config, split_config, network):
    t0 = time.perf_counter()
    variant, train, params0, z0 = _setup(observed, variant, config, split_config)
    if len(train) < 2:
        raise ValueError("training window must cover at least 2 days")
    problem = FitProblem(variant, z0, observed.population, train, network, config.integrator)
    flat = problem.pack(params0)
    state = AdamState.zeros(problem.size)
    curve = np.empty(config.iterations)
    best_loss, best_flat, best_it = math.inf, flat.copy(), -1

    def partial(it):
        if best_it < 0:
            return None
        params, net = problem.unpack(best_flat)
        return _finish(variant, observed, train, params, net, z0, curve[:it], best_loss, best_it, config, split_config, t0)

    for it in range(config.iterations):
        try:
            loss, grad = problem.loss_and_grad(flat)
        except NumericError as exc:
            raise DivergenceError(f"training diverged at iteration {it}: {exc}", it, partial(it)) from exc
        if not math.isfinite(loss.total):
            raise DivergenceError(f"non-finite loss at iteration {it}", it, partial(it))
        curve[it] = loss.total
        if loss.total < best_loss:
            best_loss, best_flat, best_it = loss.total, flat.copy(), it
        lr = lr_schedule(config.learning_rate, it, config.decay_factor, config.decay_every)
        flat, state = adam_step(flat, grad, state, lr, n_bounded=problem.n_rates)

    if config.iterations == 0:
        best_loss, best_it = problem.loss(best_flat), 0
    params, net = problem.unpack(best_flat)
    return _finish(variant, observed, train, params, net, z0, curve, best_loss, best_it, config, split_config, t0)


def train_dde(
    observed: ObservedSeries,
    variant: ModelVariant | str,
    config: TrainingConfig = TrainingConfig(),
    split_config: Mapping[str, float] | None = None,
) -> FitResult:
    """Fit rates and the effect network end to end with Adam on the log-space loss.

    Trains on everything but the last ``config.holdout_days`` days and reports
    test-window metrics from a forward run over the holdout. The returned
    parameters are those of the lowest-loss iteration.
    """
    variant = get_variant(variant)
    config = replace(config, method="dde")
    net = init_network(layer_sizes_for(variant.dim - 1, config.hidden), config.seed)
    return _adam_fit(observed, variant, config, split_config, net)


def fit_constant_gradient(
    observed: ObservedSeries,
    variant: ModelVariant | str,
    config: TrainingConfig = TrainingConfig(method="const-grad"),
    split_config: Mapping[str, float] | None = None,
) -> FitResult:
    """Same machinery as :func:`train_dde` with the network removed (``beta_eff = beta_star``)."""
    config = replace(config, method="const-grad")
    return _adam_fit(observed, variant, config, split_config, None)


def nelder_mead_fit(
    observed: ObservedSeries,
    variant: ModelVariant | str,
    initial_params: RateParameters | None = None,
    max_iters: int | None = None,
    tolerances: tuple[float, float] | None = None,
    config: TrainingConfig = TrainingConfig(method="nelder-mead"),
    split_config: Mapping[str, float] | None = None,
) -> FitResult:
    """Constant-rate fit by simplex search over the active rates, clipped to [0, 1].

    ``max_iters`` and ``tolerances`` (xatol, fatol) default to the config values.
    """
    t0 = time.perf_counter()
    if max_iters is not None:
        config = replace(config, iterations=max_iters)
    if tolerances is not None:
        config = replace(config, nm_xatol=tolerances[0], nm_fatol=tolerances[1])
    config = replace(config, method="nelder-mead")
    variant, train, params0, z0 = _setup(observed, variant, config, split_config)
    if initial_params is not None:
        params0 = initial_params
    names = variant.active_rates
    n = observed.population
    targets = observed_targets(variant, train)
    days = len(train) - 1

    def to_params(x):
        return RateParameters.for_variant(variant, n, **dict(zip(names, np.clip(x, 0.0, 1.0).tolist())))

    def objective(x):
        params = to_params(x)
        try:
            traj = integrate(variant, z0, params, params.beta_star, days, config.integrator)
            value = trajectory_loss(traj, targets, variant).total
        except NumericError:
            return math.inf
        return value if math.isfinite(value) else math.inf

    x0 = np.array([params0.active(variant)[k] for k in names])
    res = nelder_mead(objective, x0, config.iterations, config.nm_xatol, config.nm_fatol)
    params = to_params(res.x)
    curve = np.array(res.history)
    best_it = int(np.argmin(curve)) if curve.size else 0
    return _finish(variant, observed, train, params, None, z0, curve, res.fun, best_it, config, split_config, t0)


def fit(observed: ObservedSeries, variant, config: TrainingConfig, split_config=None) -> FitResult:
    if config.method == "dde":
        return train_dde(observed, variant, config, split_config)
    if config.method == "const-grad":
        return fit_constant_gradient(observed, variant, config, split_config)
    return nelder_mead_fit(observed, variant, config=config, split_config=split_config)

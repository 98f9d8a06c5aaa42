import json

import numpy as np
import pytest

from epidde.compartments import default_parameters
from epidde.errors import DivergenceError, NumericError
from epidde.integrator import IntegratorConfig
from epidde.synthetic import constant_rate_series, declining_beta, time_varying_series
from epidde.training import (
    FitResult,
    TrainingConfig,
    fit,
    fit_constant_gradient,
    nelder_mead_fit,
    train_dde,
)
from epidde.training import gradients


@pytest.fixture(scope="module")
def series():
    params = default_parameters("SIRD", 1e5, beta_star=0.25, delta=0.05, epsilon=0.01)
    return constant_rate_series("SIRD", params, 30, 50.0)


def small(method="dde", iterations=30, **kw):
    return TrainingConfig(method=method, iterations=iterations, hidden=(4,), holdout_days=10, **kw)


def test_dde_loss_decreases(series):
    res = train_dde(series, "SIRD", small(iterations=60, learning_rate=1e-2))
    assert res.loss_curve.shape == (60,)
    assert res.final_loss < res.loss_curve[0]
    assert res.final_loss == res.loss_curve.min() == res.loss_curve[res.best_iteration]


def test_results_carry_full_window(series):
    res = train_dde(series, "SIRD", small())
    assert res.train_days == 20 and res.test_days == 10
    assert res.trajectory.values.shape == (30, 4)
    assert res.metrics.window == (20, 29)
    assert res.network is not None and res.method == "dde"


def test_training_is_deterministic(series):
    a = train_dde(series, "SEIRD", small(seed=3))
    b = train_dde(series, "SEIRD", small(seed=3))
    da, db = a.to_dict(), b.to_dict()
    da.pop("wall_time"), db.pop("wall_time")
    assert da == db


def test_zero_iterations_returns_initial_parameters(series):
    res = fit_constant_gradient(series, "SIRD", small("const-grad", 0))
    assert res.params == default_parameters("SIRD", series.population)
    assert res.loss_curve.size == 0
    assert res.final_loss > 0


def test_constant_gradient_fit_improves_and_has_no_network(series):
    res = fit_constant_gradient(series, "SIR", small("const-grad", 100, learning_rate=1e-2))
    assert res.network is None
    assert res.final_loss <= res.loss_curve[0]
    assert set(res.params.active(res.variant)) == {"beta_star", "delta"}


def test_rates_stay_in_unit_interval(series):
    res = fit_constant_gradient(series, "SIRD", small("const-grad", 200, learning_rate=0.2))
    assert all(0.0 <= v <= 1.0 for v in res.params.active(res.variant).values())


def test_nelder_mead_recovers_constant_rates(series):
    res = nelder_mead_fit(series, "SIRD", max_iters=400)
    rates = res.params.active(res.variant)
    assert rates["beta_star"] == pytest.approx(0.25, rel=0.05)
    assert rates["delta"] == pytest.approx(0.05, rel=0.05)
    assert res.final_loss <= res.loss_curve[0]


def test_nelder_mead_can_use_rk4(series):
    res = nelder_mead_fit(series, "SIRD", max_iters=20, config=small("nelder-mead", integrator=IntegratorConfig("rk4", 1)))
    assert res.config.integrator.scheme == "rk4"


@pytest.mark.parametrize("variant", ["SIR", "SEIR", "SIRD", "SEIRD", "SMCRD", "SEMCRD"])
def test_every_variant_trains(series, variant):
    res = fit(series, variant, small(iterations=5), split_config={"e0_ratio": 0.5, "mild_fraction": 0.8})
    assert np.isfinite(res.final_loss)
    assert res.split_config == {"e0_ratio": 0.5, "mild_fraction": 0.8}


def test_fit_result_json_round_trip(series):
    res = train_dde(series, "SMCRD", small())
    back = FitResult.from_dict(json.loads(json.dumps(res.to_dict())))
    assert back.to_dict() == res.to_dict()


def test_divergence_carries_partial_result(series, monkeypatch):
    original = gradients.FitProblem.loss_and_grad
    calls = []

    def failing(self, flat):
        calls.append(1)
        if len(calls) > 5:
            raise NumericError("non-finite derivative", compartment="I", day=3)
        return original(self, flat)

    monkeypatch.setattr(gradients.FitProblem, "loss_and_grad", failing)
    with pytest.raises(DivergenceError) as info:
        train_dde(series, "SIRD", small(iterations=50))
    err = info.value
    assert err.iteration == 5
    assert err.result.loss_curve.shape == (5,)
    assert err.result.best_iteration < 5


def test_time_varying_generator_matches_constant_generator():
    params = default_parameters("SIRD", 1e5, beta_star=0.25, delta=0.05, epsilon=0.01)
    a = constant_rate_series("SIRD", params, 20, 50.0)
    b = time_varying_series("SIRD", params, lambda t: 0.25, 20, 50.0)
    assert a == b
    beta = declining_beta(60)
    assert (beta(0), beta(60)) == (0.4, 0.2)

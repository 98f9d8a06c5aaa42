"""Log-space trajectory loss.

Per day ``t``::

    (1/3) * sum_k (log(obs_k + 1) - log(pred_k + 1))^2,   k in {I, R, D}

averaged over the observed days. The +1 keeps early zero counts finite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..compartments import ModelVariant, data_observables, get_variant, model_observables
from ..errors import NumericError, StructuralError
from ..integrator import Trajectory


@dataclass(frozen=True)
class LossValue:
    total: float
    per_term: dict[str, float]  # mean squared log error of each series
    per_day: np.ndarray

    def __float__(self) -> float:
        return float(self.total)


def observed_targets(variant: ModelVariant, observed) -> dict[str, np.ndarray]:
    """Accept an ObservedSeries or a mapping with I/R/D arrays."""
    if isinstance(observed, Mapping):
        if "D" in variant.labels or "D" not in observed:
            return {k: np.asarray(v, dtype=float) for k, v in observed.items() if k in ("I", "R", "D")}
        return data_observables(variant, observed["I"], observed["R"], observed["D"])
    return data_observables(variant, observed.active_infected, observed.recovered, observed.deaths)


def _residuals(variant, values, targets):
    days = len(targets["I"])
    if values.shape[0] < days:
        raise StructuralError(f"prediction covers {values.shape[0]} days, observation needs {days}")
    values = values[:days]
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise NumericError("predicted compartments must be finite and non-negative")
    preds = model_observables(variant, values)
    return {k: np.log1p(preds[k]) - np.log1p(targets[k]) for k in targets}, preds


def _value(resid, days) -> LossValue:
    sq = {k: r * r for k, r in resid.items()}
    per_day = sum(sq.values()) / 3.0
    total = per_day.sum() / days
    return LossValue(total, {k: float(v.sum() / days) for k, v in sq.items()}, per_day)


def loss_and_adjoint(variant: ModelVariant, values: np.ndarray, targets: Mapping[str, np.ndarray]):
    """Loss plus dL/d(values) for the first ``len(targets['I'])`` rows of ``values``."""
    days = len(targets["I"])
    resid, preds = _residuals(variant, values, targets)
    loss = _value(resid, days)
    adj = np.zeros((days, variant.dim), dtype=values.dtype)
    scale = 2.0 / (3.0 * days)
    g = {k: scale * resid[k] / (1.0 + preds[k]) for k in resid}
    if variant.split_infected:
        adj[:, variant.index("M")] += g["I"]
        adj[:, variant.index("C")] += g["I"]
    else:
        adj[:, variant.index("I")] += g["I"]
    adj[:, variant.index("R")] += g["R"]
    if "D" in g:
        adj[:, variant.index("D")] += g["D"]
    return loss, adj


def trajectory_loss(predicted: Trajectory | np.ndarray, observed, variant: ModelVariant | str | None = None) -> LossValue:
    if isinstance(predicted, Trajectory):
        variant = predicted.variant if variant is None else get_variant(variant)
        values = predicted.values
    else:
        if variant is None:
            raise StructuralError("variant is required for a raw prediction array")
        variant = get_variant(variant)
        values = np.asarray(predicted)
    targets = observed_targets(variant, observed)
    resid, _ = _residuals(variant, values, targets)
    return _value(resid, len(targets["I"]))

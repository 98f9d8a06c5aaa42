"""Test-window metrics: MSE in (10^4 people)^2 and Pearson correlation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

UNIT = 1e4


def _pair(pred, obs, min_len):
    pred = np.asarray(pred, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if pred.shape != obs.shape or pred.ndim != 1:
        raise ValueError(f"length mismatch: {pred.shape} vs {obs.shape}")
    if pred.size < min_len:
        raise ValueError(f"need at least {min_len} points")
    return pred, obs


def mse_ten_thousand(pred, obs) -> float:
    """Mean squared error with counts expressed in ten-thousands of people."""
    pred, obs = _pair(pred, obs, 1)
    return float(np.mean(((pred - obs) / UNIT) ** 2))


def pearson(pred, obs) -> float | None:
    """Sample Pearson coefficient, or ``None`` when either series is constant."""
    pred, obs = _pair(pred, obs, 2)
    dp = pred - pred.mean()
    do = obs - obs.mean()
    sp = math.sqrt(float(dp @ dp))
    so = math.sqrt(float(do @ do))
    if sp == 0.0 or so == 0.0 or np.ptp(pred) == 0.0 or np.ptp(obs) == 0.0:
        return None
    r = float(dp @ do) / (sp * so)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class SeriesMetrics:
    mse_1e4: float
    pearson: float | None

    def to_dict(self) -> dict:
        return {"mse_1e4": self.mse_1e4, "pearson": self.pearson}


@dataclass(frozen=True)
class EvaluationReport:
    series: dict[str, SeriesMetrics]
    window: tuple[int, int]  # first and last day index, inclusive

    @property
    def mean_mse_1e4(self) -> float:
        return float(np.mean([m.mse_1e4 for m in self.series.values()]))

    @property
    def mean_pearson(self) -> float | None:
        defined = [m.pearson for m in self.series.values() if m.pearson is not None]
        return float(np.mean(defined)) if defined else None

    @property
    def undefined_pearson(self) -> int:
        return sum(m.pearson is None for m in self.series.values())

    def to_dict(self) -> dict:
        return {
            "series": {k: v.to_dict() for k, v in self.series.items()},
            "aggregate": {
                "mse_1e4": self.mean_mse_1e4,
                "pearson": self.mean_pearson,
                "undefined_pearson": self.undefined_pearson,
            },
            "window": list(self.window),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EvaluationReport":
        series = {k: SeriesMetrics(v["mse_1e4"], v["pearson"]) for k, v in data["series"].items()}
        return cls(series, tuple(data["window"]))


def evaluate(predicted: Mapping[str, np.ndarray], observed: Mapping[str, np.ndarray], window: tuple[int, int]) -> EvaluationReport:
    """Score each series present in both mappings (keys I, R, D)."""
    series = {}
    for key in ("I", "R", "D"):
        if key in predicted and key in observed:
            series[key] = SeriesMetrics(mse_ten_thousand(predicted[key], observed[key]), pearson(predicted[key], observed[key]))
    return EvaluationReport(series, window)

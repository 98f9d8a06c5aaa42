"""Regional case series: CSV ingestion, validation and the train/test split.

CSV schema (UTF-8, header required)::

    date,cumulative_cases,recovered,deaths
    2020-01-24,572,32,38

Active infections are derived as ``cumulative - recovered - deaths``.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConsistencyError, DataError, DateGapError, MonotonicityError

CSV_COLUMNS = ("date", "cumulative_cases", "recovered", "deaths")
DEFAULT_HOLDOUT = 20


@dataclass(frozen=True)
class ObservedSeries:
    region_id: str
    dates: tuple[dt.date, ...]
    cumulative_cases: np.ndarray
    recovered: np.ndarray
    deaths: np.ndarray
    population: float

    def __post_init__(self):
        for name in ("cumulative_cases", "recovered", "deaths"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "dates", tuple(self.dates))
        _validate(self)

    def __len__(self) -> int:
        return len(self.dates)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ObservedSeries):
            return NotImplemented
        return (
            self.region_id == other.region_id
            and self.dates == other.dates
            and self.population == other.population
            and all(
                np.array_equal(getattr(self, k), getattr(other, k))
                for k in ("cumulative_cases", "recovered", "deaths")
            )
        )

    @property
    def active_infected(self) -> np.ndarray:
        return self.cumulative_cases - self.recovered - self.deaths

    def slice(self, start: int, stop: int | None = None) -> "ObservedSeries":
        sl = slice(start, stop)
        return replace(
            self,
            dates=self.dates[sl],
            cumulative_cases=self.cumulative_cases[sl],
            recovered=self.recovered[sl],
            deaths=self.deaths[sl],
        )

    def window(self, first: dt.date, last: dt.date) -> "ObservedSeries":
        """Sub-series between two calendar dates, inclusive."""
        try:
            i, j = self.dates.index(first), self.dates.index(last)
        except ValueError:
            raise DataError(f"window {first}..{last} not covered by {self.dates[0]}..{self.dates[-1]}") from None
        return self.slice(i, j + 1)


@dataclass(frozen=True)
class SplitSeries:
    train: ObservedSeries
    test: ObservedSeries


@dataclass(frozen=True)
class RegionConfig:
    region_id: str
    population: float
    e0_ratio: float = 1.0
    mild_fraction: float = 0.9

    @property
    def split_config(self) -> dict[str, float]:
        return {"e0_ratio": self.e0_ratio, "mild_fraction": self.mild_fraction}

    def to_dict(self) -> dict:
        return {
            "region_id": self.region_id,
            "population": self.population,
            "e0_ratio": self.e0_ratio,
            "mild_fraction": self.mild_fraction,
        }


def _validate(series: ObservedSeries) -> None:
    n = len(series.dates)
    if n == 0:
        raise DataError("empty series")
    if not (len(series.cumulative_cases) == len(series.recovered) == len(series.deaths) == n):
        raise DataError("column lengths differ")
    if not series.population > 0:
        raise DataError("population must be positive")
    one_day = dt.timedelta(days=1)
    for k in range(1, n):
        if series.dates[k] - series.dates[k - 1] != one_day:
            raise DateGapError(f"dates not consecutive between {series.dates[k - 1]} and {series.dates[k]} (row {k + 1})")
    for name in ("cumulative_cases", "recovered", "deaths"):
        col = getattr(series, name)
        if not np.all(np.isfinite(col)) or np.any(col < 0):
            raise DataError(f"{name} must be finite and non-negative")
        drops = np.flatnonzero(np.diff(col) < 0)
        if drops.size:
            row = int(drops[0]) + 2
            raise MonotonicityError(f"{name} decreases at row {row} ({col[row - 2]} -> {col[row - 1]})")
    bad = np.flatnonzero(series.recovered + series.deaths > series.cumulative_cases)
    if bad.size:
        raise ConsistencyError(f"recovered + deaths exceed cumulative cases at row {int(bad[0]) + 1}")


def _number(text: str, name: str, row: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"row {row}: {name}={text!r} is not a number") from None


def load_region_csv(path: str | Path, population: float, region_id: str | None = None) -> ObservedSeries:
    """Parse and validate a case CSV. Row numbers in errors count data rows from 1."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        if reader.fieldnames is None or tuple(f.strip() for f in reader.fieldnames) != CSV_COLUMNS:
            raise DataError(f"{path}: header must be {','.join(CSV_COLUMNS)}, got {reader.fieldnames}")
        dates, cum, rec, dead = [], [], [], []
        for row_no, row in enumerate(reader, start=1):
            try:
                dates.append(dt.date.fromisoformat(row["date"].strip()))
            except ValueError:
                raise DataError(f"row {row_no}: bad ISO date {row['date']!r}") from None
            cum.append(_number(row["cumulative_cases"], "cumulative_cases", row_no))
            rec.append(_number(row["recovered"], "recovered", row_no))
            dead.append(_number(row["deaths"], "deaths", row_no))
    return ObservedSeries(region_id or path.stem, tuple(dates), np.array(cum), np.array(rec), np.array(dead), float(population))


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def write_region_csv(series: ObservedSeries, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for k, day in enumerate(series.dates):
            writer.writerow(
                [day.isoformat(), _fmt(series.cumulative_cases[k]), _fmt(series.recovered[k]), _fmt(series.deaths[k])]
            )


def split_train_test(series: ObservedSeries, holdout_days: int = DEFAULT_HOLDOUT) -> SplitSeries:
    if holdout_days < 1:
        raise ValueError("holdout_days must be >= 1")
    if len(series) <= holdout_days:
        raise DataError(f"series of {len(series)} days is too short for a {holdout_days}-day holdout")
    cut = len(series) - holdout_days
    return SplitSeries(series.slice(0, cut), series.slice(cut))


def load_region_config(path: str | Path) -> RegionConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        cfg = RegionConfig(
            region_id=str(raw["region_id"]),
            population=float(raw["population"]),
            e0_ratio=float(raw.get("e0_ratio", 1.0)),
            mild_fraction=float(raw.get("mild_fraction", 0.9)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid region config ({exc})") from None
    if not cfg.population > 0 or cfg.e0_ratio < 0 or not 0 <= cfg.mild_fraction <= 1:
        raise DataError(f"{path}: region config values out of range")
    return cfg


# Bundled fixtures -----------------------------------------------------------

_FIXTURES = {"CN-WH": "cn_wh"}


def bundled_regions() -> list[str]:
    return sorted(_FIXTURES)


def bundled_paths(region_id: str) -> tuple[Path, Path]:
    """(csv, config) paths of a bundled region."""
    try:
        stem = _FIXTURES[region_id.upper()]
    except KeyError:
        raise DataError(f"no bundled data for {region_id!r}; available: {bundled_regions()}") from None
    root = resources.files("epidde") / "fixtures"
    return Path(str(root / f"{stem}.csv")), Path(str(root / f"{stem}.json"))


def load_bundled(region_id: str) -> tuple[ObservedSeries, RegionConfig]:
    csv_path, cfg_path = bundled_paths(region_id)
    cfg = load_region_config(cfg_path)
    return load_region_csv(csv_path, cfg.population, cfg.region_id), cfg

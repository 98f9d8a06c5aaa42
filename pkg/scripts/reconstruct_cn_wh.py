"""Rebuild the bundled CN-WH (Wuhan) fixture, 2020-01-24 .. 2020-04-15.

APPROXIMATE DATA. The values below are an offline reconstruction of the
Wuhan municipal daily bulletins (cumulative confirmed, discharged, deaths),
written down from memory of the public record rather than downloaded. Daily
cumulative cases are listed directly; recoveries and deaths are given at
anchor dates and filled with monotone (PCHIP) interpolation. Expect
day-level discrepancies against the official series. When network access is
available, replace the fixture with real data via ``scripts/fetch_open_data.py``.

Usage::

    python scripts/reconstruct_cn_wh.py  # rewrites src/epidde/fixtures/cn_wh.csv
"""

from __future__ import annotations

import datetime as dt
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from epidde.data import ObservedSeries, write_region_csv

START = dt.date(2020, 1, 24)
END = dt.date(2020, 4, 15)
POPULATION = 11_081_000

# cumulative confirmed, one value per day from START
CUMULATIVE = [
    572, 618, 698, 1590, 1905, 2261, 2639, 3215,  # Jan 24-31
    4109, 5142, 6384, 8351, 10117, 11618, 13603, 14982, 16902, 18454,  # Feb 1-10
    19558, 32994, 35991, 37914, 39462, 41152, 42752, 44412, 45027, 45346,  # Feb 11-20
    45660, 46201, 46607, 47071, 47441, 47824, 48137, 48557, 49122,  # Feb 21-29
    49315, 49426, 49540, 49671, 49797, 49871, 49912, 49948, 49965, 49978,  # Mar 1-10
    49986, 49991, 49995, 49999, 50003, 50004, 50005, 50005, 50005, 50005,  # Mar 11-20
    50005, 50005, 50006, 50006, 50006, 50006, 50006, 50006, 50006, 50006, 50006,  # Mar 21-31
    50006, 50006, 50007, 50007, 50007, 50007, 50007, 50007, 50007, 50007,  # Apr 1-10
    50008, 50008, 50008, 50008, 50008,  # Apr 11-15
]

# (date, value) anchors
DEATHS = [
    ("2020-01-24", 38), ("2020-01-27", 85), ("2020-01-31", 192), ("2020-02-04", 362),
    ("2020-02-08", 608), ("2020-02-11", 820), ("2020-02-13", 1016), ("2020-02-16", 1233),
    ("2020-02-20", 1585), ("2020-02-24", 1987), ("2020-02-28", 2132), ("2020-03-03", 2260),
    ("2020-03-08", 2370), ("2020-03-14", 2446), ("2020-03-20", 2504), ("2020-03-26", 2543),
    ("2020-04-01", 2566), ("2020-04-08", 2574), ("2020-04-15", 2579),
]

RECOVERED = [
    ("2020-01-24", 32), ("2020-01-31", 171), ("2020-02-07", 816), ("2020-02-14", 3014),
    ("2020-02-21", 7206), ("2020-02-24", 10337), ("2020-03-01", 17800), ("2020-03-08", 31000),
    ("2020-03-15", 38550), ("2020-03-22", 42500), ("2020-04-01", 45440), ("2020-04-15", 46830),
]


def _fill(anchors, days):
    x = np.array([(dt.date.fromisoformat(d) - START).days for d, _ in anchors], dtype=float)
    y = np.array([v for _, v in anchors], dtype=float)
    values = np.round(PchipInterpolator(x, y)(np.arange(days)))
    return np.maximum.accumulate(values)


def build() -> ObservedSeries:
    days = (END - START).days + 1
    assert len(CUMULATIVE) == days, len(CUMULATIVE)
    cumulative = np.array(CUMULATIVE, dtype=float)
    deaths = _fill(DEATHS, days)
    recovered = _fill(RECOVERED, days)
    dates = tuple(START + dt.timedelta(days=k) for k in range(days))
    return ObservedSeries("CN-WH", dates, cumulative, recovered, deaths, POPULATION)


if __name__ == "__main__":
    target = Path(__file__).resolve().parents[1] / "src" / "epidde" / "fixtures" / "cn_wh.csv"
    series = build()
    write_region_csv(series, target)
    print(f"wrote {len(series)} days to {target}")

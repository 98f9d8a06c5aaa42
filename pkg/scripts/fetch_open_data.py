"""Convert a covid19-open-data per-location CSV into the epidde region schema.

Writes ``<out>/<stem>.csv`` (date, cumulative_cases, recovered, deaths) and
``<out>/<stem>.json`` (region config) for one region and date window.

The source is the aggregated v3 table, one file per location key::

    https://storage.googleapis.com/covid19-open-data/v3/location/<KEY>.csv

Pass ``--source`` to read an already downloaded file instead of the URL.
Cumulative columns that dip (reporting corrections) are replaced by their
running maximum, and missing recoveries are carried forward; both repairs are
counted in the printed summary.

Examples::

    python scripts/fetch_open_data.py ZA --out data/
    python scripts/fetch_open_data.py IT-PD --source IT_21.csv --out data/
    python scripts/fetch_open_data.py CUSTOM --key DE --start 2020-03-01 --end 2020-06-30 --population 83e6
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import io
import json
import sys
import urllib.request
from pathlib import Path

import numpy as np

from epidde.data import ObservedSeries, write_region_csv

URL = "https://storage.googleapis.com/covid19-open-data/v3/location/{key}.csv"

# region id -> (location key, first day, last day)
REGIONS = {
    "USA": ("US", "2020-01-23", "2020-08-12"),
    "CO": ("CO", "2020-03-06", "2020-08-11"),
    "ZA": ("ZA", "2020-03-07", "2020-08-12"),
    "IT-PD": ("IT_21", "2020-02-24", "2020-06-08"),
    # the open-data tables key Chinese data by province; pass --key for a city-level source
    "CN-WH": (None, "2020-01-24", "2020-04-15"),
}


def _read_rows(key: str | None, source: str | None) -> list[dict]:
    if source:
        text = Path(source).read_text(encoding="utf-8")
    else:
        if key is None:
            sys.exit("no location key known for this region; pass --key or --source")
        with urllib.request.urlopen(URL.format(key=key), timeout=60) as resp:
            text = resp.read().decode("utf-8")
    return list(csv.DictReader(io.StringIO(text)))


def _column(rows, name):
    out = []
    for row in rows:
        value = row.get(name, "")
        out.append(float(value) if value not in ("", None) else np.nan)
    return np.array(out)


def _repair(values: np.ndarray) -> tuple[np.ndarray, int, int]:
    """Forward-fill gaps (leading gaps become 0) and take the running maximum."""
    filled = values.copy()
    gaps = int(np.isnan(filled).sum())
    last = 0.0
    for k, v in enumerate(filled):
        if np.isnan(v):
            filled[k] = last
        else:
            last = v
    dips = int(np.sum(np.diff(filled) < 0))
    return np.maximum.accumulate(filled), gaps, dips


def convert(rows, region_id, start, end, population=None) -> tuple[ObservedSeries, dict]:
    first, last = dt.date.fromisoformat(start), dt.date.fromisoformat(end)
    by_date = {dt.date.fromisoformat(r["date"]): r for r in rows}
    days = [first + dt.timedelta(days=k) for k in range((last - first).days + 1)]
    missing = [d for d in days if d not in by_date]
    if missing:
        sys.exit(f"source lacks {len(missing)} days in the window, first {missing[0]}")
    window = [by_date[d] for d in days]
    cum, g1, d1 = _repair(_column(window, "cumulative_confirmed"))
    rec, g2, d2 = _repair(_column(window, "cumulative_recovered"))
    dead, g3, d3 = _repair(_column(window, "cumulative_deceased"))
    # recoveries are the least reliable column; cap them so the series stays consistent
    rec = np.minimum(rec, cum - dead)
    if population is None:
        pops = _column(window, "population")
        if np.all(np.isnan(pops)):
            sys.exit("source has no population column; pass --population")
        population = float(np.nanmax(pops))
    series = ObservedSeries(region_id, tuple(days), cum, rec, dead, population)
    stats = {"filled_gaps": g1 + g2 + g3, "repaired_dips": d1 + d2 + d3}
    return series, stats


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("region", help=f"one of {', '.join(REGIONS)} or any id together with --key/--start/--end")
    parser.add_argument("--key", help="open-data location key (overrides the built-in table)")
    parser.add_argument("--source", help="local copy of the location CSV")
    parser.add_argument("--start")
    parser.add_argument("--end")
    parser.add_argument("--population", type=float)
    parser.add_argument("--out", default="data")
    args = parser.parse_args(argv)

    key, start, end = REGIONS.get(args.region.upper(), (None, None, None))
    key, start, end = args.key or key, args.start or start, args.end or end
    if start is None or end is None:
        parser.error("unknown region: give --start and --end")
    series, stats = convert(_read_rows(key, args.source), args.region.upper(), start, end, args.population)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = args.region.lower().replace("-", "_")
    write_region_csv(series, out / f"{stem}.csv")
    config = {"region_id": series.region_id, "population": series.population, "e0_ratio": 1.0, "mild_fraction": 0.9}
    (out / f"{stem}.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    print(f"{series.region_id}: {len(series)} days {start}..{end}, N={series.population:.0f}, {stats}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

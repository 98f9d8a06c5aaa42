"""Command line: fit, evaluate, forecast, export-rates.

Exit codes: 0 success, 1 data error, 2 numeric divergence, 3 bad flags.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .compartments import VARIANTS, get_variant, initial_state, model_observables
from .data import (
    ObservedSeries,
    RegionConfig,
    bundled_paths,
    bundled_regions,
    load_region_config,
    load_region_csv,
)
from .effect_net import forward
from .errors import DataError, InfeasibleInitializationError, NumericError, StructuralError
from .integrator import IntegratorConfig
from .training import METHODS, FitResult, TrainingConfig, fit, holdout_report, simulate

log = logging.getLogger("epidde")

EXIT_OK, EXIT_DATA, EXIT_NUMERIC, EXIT_FLAGS = 0, 1, 2, 3


class FlagError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FLAGS, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    command: str
    data: str | None = None
    region_config: str | None = None
    variant: str | None = None
    method: str | None = None
    integrator: dict = field(default_factory=dict)
    training: dict = field(default_factory=dict)
    seed: int | None = None
    out: str | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


# output helpers ----------------------------------------------------------------


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, manifest: dict, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("# manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _date(start: str | None, day: int) -> str:
    if start is None:
        return ""
    return (dt.date.fromisoformat(start) + dt.timedelta(days=day)).isoformat()


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("hidden sizes must be positive")
    return values


# data resolution ---------------------------------------------------------------


def _resolve_data(data: str, region: str | None) -> tuple[ObservedSeries, RegionConfig]:
    """A CSV path plus region config, or a bundled region id (config optional)."""
    path = Path(data)
    if not path.exists() and data.upper() in bundled_regions():
        path, default_cfg = bundled_paths(data)
        region = region or str(default_cfg)
    if region is None:
        raise FlagError("--region is required unless --data names a bundled region " f"({', '.join(bundled_regions())})")
    cfg = load_region_config(region)
    return load_region_csv(path, cfg.population, cfg.region_id), cfg


def _load_fit(path: str) -> tuple[dict, FitResult]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return raw, FitResult.from_dict(raw)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read fit file {path}: {exc}") from None


def _series_for_fit(fit_result: FitResult, data: str, region: str | None) -> ObservedSeries:
    path = Path(data)
    if not path.exists() and data.upper() in bundled_regions():
        path, default_cfg = bundled_paths(data)
        region = region or str(default_cfg)
    population = load_region_config(region).population if region else fit_result.params.population
    series = load_region_csv(path, population, fit_result.region_id)
    expected = fit_result.train_days + fit_result.test_days
    if len(series) != expected or series.dates[0].isoformat() != fit_result.start_date:
        raise DataError(
            f"data covers {series.dates[0]}..{series.dates[-1]} ({len(series)} days); "
            f"fit expects {expected} days from {fit_result.start_date}"
        )
    return series


def _recompute_trajectory(fit_result: FitResult, series: ObservedSeries):
    z0 = initial_state(
        fit_result.variant,
        (series.active_infected[0], series.recovered[0], series.deaths[0]),
        fit_result.params,
        fit_result.split_config,
    )
    return simulate(
        fit_result.variant, z0, fit_result.params, fit_result.network, len(series) - 1, fit_result.config.integrator
    )


# commands -----------------------------------------------------------------------


def _fit_one(args, variant: str, method: str, out: Path) -> None:
    series, cfg = _resolve_data(args.data, args.region)
    integrator = IntegratorConfig(args.integrator, args.substeps)
    if method != "nelder-mead" and integrator.scheme != "euler":
        raise FlagError(f"method {method} trains through the Euler path; use --integrator euler")
    config = TrainingConfig(
        method=method,
        iterations=args.iters,
        learning_rate=args.lr,
        seed=args.seed,
        integrator=integrator,
        hidden=args.hidden,
        holdout_days=args.test_days,
    )
    manifest = RunManifest(
        command="fit",
        data=args.data,
        region_config=args.region,
        variant=variant.upper(),
        method=method,
        integrator=integrator.to_dict(),
        training=config.to_dict(),
        seed=args.seed,
        out=str(out),
    ).to_dict()
    log.info("fitting %s/%s on %s (%d days)", variant.upper(), method, series.region_id, len(series))
    result = fit(series, variant, config, cfg.split_config)
    out.mkdir(parents=True, exist_ok=True)
    doc = result.to_dict()
    doc["manifest"] = manifest
    _dump_json(doc, out / "fit.json")
    _write_csv(out / "loss_curve.csv", manifest, ["iteration", "loss"], [[k, repr(float(v))] for k, v in enumerate(result.loss_curve)])
    _write_trajectory_csv(out / "trajectory.csv", manifest, result, series)
    if result.metrics is not None:
        agg = result.metrics.to_dict()["aggregate"]
        log.info("test mse_1e4=%.4g pearson=%s", agg["mse_1e4"], agg["pearson"])


def _write_trajectory_csv(path: Path, manifest: dict, result: FitResult, series: ObservedSeries) -> None:
    variant = result.variant
    pred = model_observables(variant, result.trajectory.values)
    keys = list(pred)
    header = ["day", "date", "split", *variant.labels, *(f"{k}_hat" for k in keys), "obs_I", "obs_R", "obs_D"]
    rows = []
    for t, z in enumerate(result.trajectory.values):
        rows.append(
            [
                t,
                series.dates[t].isoformat(),
                "train" if t < result.train_days else "test",
                *(repr(float(v)) for v in z),
                *(repr(float(pred[k][t])) for k in keys),
                repr(float(series.active_infected[t])),
                repr(float(series.recovered[t])),
                repr(float(series.deaths[t])),
            ]
        )
    _write_csv(path, manifest, header, rows)


def cmd_fit(args) -> int:
    variants = [v.strip() for v in args.variant.split(",")]
    methods = [m.strip() for m in args.method.split(",")]
    for v in variants:
        if v.upper() not in VARIANTS:
            raise FlagError(f"unknown variant {v!r}")
    for m in methods:
        if m not in METHODS:
            raise FlagError(f"unknown method {m!r}")
    if args.iters < 1:
        raise FlagError("--iters must be >= 1")
    out = Path(args.out)
    if len(variants) == 1 and len(methods) == 1 and not args.grid:
        _fit_one(args, variants[0], methods[0], out)
        return EXIT_OK
    if not args.grid:
        raise FlagError("several variants or methods need --grid")
    jobs = [(v, m) for v in variants for m in methods]
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        futures = [pool.submit(_fit_one, args, v, m, out / f"{v.lower()}-{m}") for v, m in jobs]
        for f in futures:
            f.result()
    return EXIT_OK


def cmd_evaluate(args) -> int:
    raw, fit_result = _load_fit(args.fit)
    if args.variant and get_variant(args.variant) != fit_result.variant:
        raise FlagError(f"fit is {fit_result.variant.tag}, not {args.variant.upper()}")
    series = _series_for_fit(fit_result, args.data, args.region)
    traj = _recompute_trajectory(fit_result, series)
    report = holdout_report(fit_result.variant, traj, series, fit_result.train_days)
    manifest = RunManifest(
        command="evaluate",
        data=args.data,
        region_config=args.region,
        variant=fit_result.variant.tag,
        method=fit_result.method,
        out=args.out,
        extra={"fit": args.fit, "fit_manifest": raw.get("manifest")},
    ).to_dict()
    doc = {"manifest": manifest, "report": None if report is None else report.to_dict()}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_forecast(args) -> int:
    if args.horizon < 1:
        raise FlagError("--horizon must be >= 1")
    raw, fit_result = _load_fit(args.fit)
    start = fit_result.trajectory.values[fit_result.train_days - 1]
    traj = simulate(
        fit_result.variant,
        start,
        fit_result.params,
        fit_result.network,
        args.horizon,
        fit_result.config.integrator,
    )
    if not np.all(np.isfinite(traj.values)):
        raise NumericError("forecast produced non-finite values")
    variant = fit_result.variant
    pred = model_observables(variant, traj.values)
    manifest = RunManifest(
        command="forecast",
        variant=variant.tag,
        method=fit_result.method,
        out=args.out,
        extra={"fit": args.fit, "horizon": args.horizon, "fit_manifest": raw.get("manifest")},
    ).to_dict()
    first_day = fit_result.train_days
    header = ["day", "date", *variant.labels, "I_hat"]
    rows = [
        [
            first_day + k,
            _date(fit_result.start_date, first_day + k),
            *(repr(float(v)) for v in traj.values[k + 1]),
            repr(float(pred["I"][k + 1])),
        ]
        for k in range(args.horizon)
    ]
    _emit_csv(args.out, manifest, header, rows)
    return EXIT_OK


def cmd_export_rates(args) -> int:
    raw, fit_result = _load_fit(args.fit)
    if fit_result.network is None:
        raise FlagError(f"{fit_result.method} fit has no effect network to evaluate")
    if args.data:
        traj = _recompute_trajectory(fit_result, _series_for_fit(fit_result, args.data, args.region)).values
    else:
        traj = fit_result.trajectory.values
    beta = fit_result.params.beta_star
    n = fit_result.params.population
    rows = []
    for t, z in enumerate(traj):
        eff = forward(fit_result.network, z[1:] / n)[0]
        rows.append([t, _date(fit_result.start_date, t), repr(float(beta)), repr(float(beta * eff))])
    manifest = RunManifest(
        command="export-rates",
        data=args.data,
        region_config=args.region,
        variant=fit_result.variant.tag,
        method=fit_result.method,
        out=args.out,
        extra={"fit": args.fit, "fit_manifest": raw.get("manifest")},
    ).to_dict()
    _emit_csv(args.out, manifest, ["day", "date", "beta_initial", "beta_effective"], rows)
    return EXIT_OK


def _emit_csv(out, manifest, header, rows):
    if out:
        _write_csv(Path(out), manifest, header, rows)
    else:
        sys.stdout.write("# manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="epidde", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a model to a case series")
    p.add_argument("--data", required=True, help=f"CSV path or bundled region id ({', '.join(bundled_regions())})")
    p.add_argument("--region", help="region config JSON {region_id, population, e0_ratio, mild_fraction}")
    p.add_argument("--variant", default="sird", help="one of sir,seir,sird,seird,smcrd,semcrd (comma list with --grid)")
    p.add_argument("--method", default="dde", help="one of dde,const-grad,nelder-mead (comma list with --grid)")
    p.add_argument("--integrator", choices=("euler", "rk4"), default="euler")
    p.add_argument("--substeps", type=int, default=4, help="integration substeps per day")
    p.add_argument("--hidden", type=_int_list, default=(16, 16), help="hidden layer widths, e.g. 16,16")
    p.add_argument("--iters", type=int, default=5000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-days", type=int, default=20)
    p.add_argument("--out", default="out")
    p.add_argument("--grid", action="store_true", help="fit every variant x method combination")
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="recompute test-window metrics from a fit")
    p.add_argument("fit")
    p.add_argument("--data", required=True)
    p.add_argument("--region")
    p.add_argument("--variant")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("forecast", help="integrate forward from the last training day")
    p.add_argument("fit")
    p.add_argument("--horizon", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("export-rates", help="beta_star and beta_effective along the fitted trajectory")
    p.add_argument("fit")
    p.add_argument("--data")
    p.add_argument("--region")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_rates)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, or a flag argparse rejected
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except FlagError as exc:
        print(f"epidde: bad flags: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except (DataError, InfeasibleInitializationError, OSError) as exc:
        print(f"epidde: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"epidde: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, StructuralError) as exc:
        print(f"epidde: bad flags: {exc}", file=sys.stderr)
        return EXIT_FLAGS


if __name__ == "__main__":
    sys.exit(main())

"""Fit every variant with every method on one region and print the test-window table.

    python scripts/compare_methods.py                       # bundled CN-WH, all variants
    python scripts/compare_methods.py --variants sird,seird --iters 2000 --workers 4
    python scripts/compare_methods.py --data data/za.csv --region data/za.json
"""

from __future__ import annotations

import argparse
from concurrent.futures import ThreadPoolExecutor

from epidde.data import load_bundled, load_region_config, load_region_csv
from epidde.training import METHODS, TrainingConfig, fit


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data", default="CN-WH", help="bundled region id or CSV path (with --region)")
    parser.add_argument("--region")
    parser.add_argument("--variants", default="sird,seird,smcrd,semcrd")
    parser.add_argument("--methods", default=",".join(METHODS))
    parser.add_argument("--iters", type=int, default=5000)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    if args.region:
        cfg = load_region_config(args.region)
        series = load_region_csv(args.data, cfg.population, cfg.region_id)
    else:
        series, cfg = load_bundled(args.data)
    jobs = [(v.strip().upper(), m.strip()) for v in args.variants.split(",") for m in args.methods.split(",")]

    def run(job):
        variant, method = job
        return job, fit(series, variant, TrainingConfig(method=method, iterations=args.iters), cfg.split_config)

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        results = list(pool.map(run, jobs))

    print(f"{series.region_id}: {len(series)} days from {series.dates[0]}, test window {results[0][1].test_days} days")
    print(f"{'variant':8s} {'method':12s} {'train loss':>11s} {'MSE(1e4)':>10s} {'Pearson':>8s} {'r(I)':>7s} {'r(R)':>7s} {'r(D)':>7s}")
    for (variant, method), res in results:
        m = res.metrics
        r = {k: m.series[k].pearson if k in m.series else None for k in "IRD"}
        cells = " ".join(f"{v:7.4f}" if v is not None else f"{'n/a':>7s}" for v in r.values())
        mean = f"{m.mean_pearson:8.4f}" if m.mean_pearson is not None else f"{'n/a':>8s}"
        print(f"{variant:8s} {method:12s} {res.final_loss:11.4e} {m.mean_mse_1e4:10.4f} {mean} {cells}")


if __name__ == "__main__":
    main()

"""Spread of the target feature's slope among accuracy-superior models across noise levels.

Example::

    python3 scripts/snr_tradeoff.py --sigmas 0 0.01 2 10 --seeds 42 43 44 45 46
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from xhacking.search import SearchSpace, aggregate_range, pareto_points, run_search
from xhacking.tabular import SimulationSpec, draw_explain_sample, simulate_collinear, split

HERE = Path(__file__).parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sigmas", type=float, nargs="+", default=[0.0, 2.0, 10.0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[42, 43, 44, 45, 46])
    ap.add_argument("--space", default=str(HERE / "sim_space.json"))
    ap.add_argument("--target", type=int, default=1)
    ap.add_argument("--aggregate", default="slope", choices=("slope", "mean-signed-shap"))
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default=None, help="directory for per-run Pareto CSVs")
    args = ap.parse_args()

    space = SearchSpace.load(args.space)
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    for sigma in args.sigmas:
        ranges = []
        for seed in args.seeds:
            sp = split(simulate_collinear(SimulationSpec(1000, sigma, sigma, seed=seed)), 0.2, seed)
            res = run_search(space, sp, draw_explain_sample(sp, 50, 100, seed), seed, workers=args.workers)
            ranges.append(aggregate_range(res, args.target, args.aggregate))
            print(f"sigma {sigma:<6g} seed {seed}  baseline acc {res.baseline.accuracy:.3f}  "
                  f"range {ranges[-1]:.5f}", flush=True)
            if out:
                with open(out / f"pareto_sigma{sigma:g}_seed{seed}.csv", "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["id", "accuracy", args.aggregate, "rank"])
                    for p in pareto_points(res, args.target, args.aggregate):
                        w.writerow([p.config_id, repr(p.accuracy), repr(p.aggregate), p.rank])
        print(f"sigma {sigma:<6g} median range {np.median(ranges):.5f}")


if __name__ == "__main__":
    main()

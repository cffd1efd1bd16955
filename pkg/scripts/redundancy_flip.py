"""Directed search for a sign flip on a redundant feature of the collinear simulation.

Example::

    python3 scripts/redundancy_flip.py --sigma 0.1 --out runs/flip
"""

import argparse
from dataclasses import replace
from pathlib import Path

from xhacking.search import (DirectedParams, SearchSpace, rank_directed, run_search, save_result,
                             suggest_lambda)
from xhacking.summary import slope_sign
from xhacking.tabular import SimulationSpec, draw_explain_sample, simulate_collinear, split

HERE = Path(__file__).parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sigma", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--space", default=str(HERE / "sim_space.json"))
    ap.add_argument("--target", type=int, default=1, help="feature index to flip")
    ap.add_argument("--independent", action="store_true", help="replace the target by independent noise")
    ap.add_argument("--fallback-lambda", type=float, default=1.0,
                    help="used when the baseline is already the most accurate model")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    name = f"f{args.target}"
    indep = (name,) if args.independent else ()
    data = simulate_collinear(SimulationSpec(1000, args.sigma, args.sigma, seed=args.seed, independent=indep))
    sp = split(data, 0.2, args.seed)
    sample = draw_explain_sample(sp, 50, 100, args.seed)
    res = run_search(SearchSpace.load(args.space), sp, sample, args.seed, workers=args.workers)

    lam = suggest_lambda(res, args.target) or args.fallback_lambda
    params, ranked = rank_directed(res.baseline, res.candidates, DirectedParams(args.target, lam))
    base = res.baseline
    print(f"baseline acc {base.accuracy:.3f}  {name} slope {base.slopes.slopes[args.target]:+.5f}  lambda {lam:.4g}")
    for c in ranked[:10]:
        s = c.slopes.slopes[args.target]
        mark = "flip" if slope_sign(s) == -params.baseline_sign else ""
        q = "-" if c.q_score is None else f"{c.q_score:.4f}"
        print(f"{c.id:4d} {c.config.family:24s} {c.config.preprocess:12s} acc {c.accuracy:.3f} "
              f"slope {s:+.5f} Q {q} {mark}")
    if args.out:
        print("saved to", save_result(replace(res, candidates=tuple(ranked), mode="directed", params=params), args.out))


if __name__ == "__main__":
    main()

"""Accuracy-only search followed by post-hoc selection of explanation-changing models.

Runs on the collinear simulation by default, or on any CSV with a schema file.

Example::

    python3 scripts/cherry_picking.py --budget 50
    python3 scripts/cherry_picking.py --data my.csv --schema my_schema.json
"""

import argparse

from xhacking.search import SearchSpace, cherry_table, run_search
from xhacking.tabular import (FeatureSchema, SimulationSpec, draw_explain_sample, load_csv,
                              simulate_collinear, split)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", default=None)
    ap.add_argument("--schema", default=None)
    ap.add_argument("--sigma", type=float, default=0.1)
    ap.add_argument("--budget", type=int, default=50)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    if args.data:
        if not args.schema:
            ap.error("--data needs --schema")
        data = load_csv(args.data, FeatureSchema.load(args.schema))
    else:
        data = simulate_collinear(SimulationSpec(1000, args.sigma, args.sigma, seed=args.seed))
    sp = split(data, 0.2, args.seed)
    sample = draw_explain_sample(sp, min(50, sp.train.n_rows), min(100, sp.test.n_rows), args.seed)
    res = run_search(SearchSpace(budget=args.budget), sp, sample, args.seed, workers=args.workers)

    print(f"baseline acc {res.baseline.accuracy:.3f}; {len(res.candidates)} candidates, "
          f"{len(res.failures)} failures")
    table = cherry_table(res)
    cols = list(table[0])
    print("  ".join(cols))
    for row in table:
        print("  ".join("-" if row[c] is None else (f"{row[c]:.3f}" if isinstance(row[c], float) else str(row[c]))
                        for c in cols))


if __name__ == "__main__":
    main()

"""Command-line entry point: ``xhack simulate | search | report | detect``.

Every command writes into ``--out``:

* ``run_config.json``: the fully resolved parameters; pass it back with
  ``--config`` to replay the run.
* ``run_manifest.json``: tool version, seed and SHA-256 of every input file.
* ``timings.json``: wall-clock seconds per stage. This is the only output that
  differs between replays.
* ``error.json`` on failure, with a nonzero exit code.

The output directory and ``--workers`` are execution settings and are not part
of the run configuration: changing either never changes the results.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from . import __version__
from .audit import build_distribution, locate, save_report
from .search import (DirectedParams, SearchSpace, aggregate_range, cherry_table, load_result,
                     pareto_points, rank_directed, relative_change_rows, run_search, save_result,
                     suggest_lambda)
from .shapley import ExplainerConfig
from .summary import DEFAULT_TOP_K
from .tabular import FeatureSchema, SimulationSpec, draw_explain_sample, load_csv, simulate_collinear, split

log = logging.getLogger("xhack")

EXIT_OK, EXIT_FAIL = 0, 2
REPORT_KINDS = ("importance-change", "slopes", "pareto", "histogram")


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    seed: int = 42
    options: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"tool": "xhack", "command": self.command, "seed": self.seed, "options": self.options}

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        d = json.loads(Path(path).read_text())
        if d.get("tool") != "xhack":
            raise UsageError(f"{path} is not a run configuration")
        return cls(d["command"], int(d["seed"]), dict(d["options"]))


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])


def _read_json_arg(value: str | None) -> dict | None:
    """A JSON object given inline or as a path to a file."""
    if value is None:
        return None
    text = value if value.lstrip().startswith("{") else Path(value).read_text()
    obj = json.loads(text)
    if not isinstance(obj, dict):
        raise UsageError("expected a JSON object")
    return obj


def _feature_index(feature, names) -> int:
    names = list(names)
    if isinstance(feature, str) and feature in names:
        return names.index(feature)
    try:
        j = int(feature)
    except (TypeError, ValueError):
        raise UsageError(f"unknown feature {feature!r}; columns are {names}") from None
    if not 0 <= j < len(names):
        raise UsageError(f"feature index {j} out of range")
    return j


# ---------------------------------------------------------------- resolution


def resolve(args: argparse.Namespace) -> RunConfig:
    """Merge flags over an optional ``--config`` file into a RunConfig."""
    base = RunConfig.load(args.config) if args.config else None
    if base is not None and base.command != args.command:
        raise UsageError(f"--config holds a {base.command!r} run, not {args.command!r}")
    opts = dict(base.options) if base else {}
    seed = args.seed if args.seed is not None else (base.seed if base else 42)

    def put(key, value):
        if value is not None:
            opts[key] = value

    if args.command == "simulate":
        if args.spec:
            opts["spec"] = SimulationSpec.from_dict(_read_json_arg(args.spec)).to_dict()
        if "spec" not in opts:
            raise UsageError("simulate needs a spec file")
        seed = opts["spec"]["seed"] if args.seed is None else seed
        opts["spec"]["seed"] = seed
    elif args.command == "search":
        put("data", args.data)
        put("schema", args.schema)
        if args.space:
            opts["space"] = _read_json_arg(args.space)
        opts.setdefault("space", SearchSpace().to_dict())
        if args.budget is not None:
            opts["space"] = {**opts["space"], "budget": args.budget}
        SearchSpace.from_dict(opts["space"])  # validate early
        put("mode", args.mode)
        opts.setdefault("mode", "cherry")
        if args.params:
            opts["params"] = _read_json_arg(args.params)
        put("feature", args.feature)
        put("top_k", args.top_k)
        put("test_fraction", args.test_fraction)
        put("background_size", args.background_size)
        put("eval_size", args.eval_size)
        opts.setdefault("test_fraction", 0.2)
        opts.setdefault("background_size", 50)
        opts.setdefault("eval_size", 100)
        opts.setdefault("top_k", DEFAULT_TOP_K)
        for key in ("data", "schema"):
            if key not in opts:
                raise UsageError(f"search needs --{key}")
        if opts["mode"] not in ("cherry", "directed"):
            raise UsageError("--mode must be cherry or directed")
        if opts["mode"] == "directed" and not opts.get("params"):
            raise UsageError("directed mode needs --params")
    elif args.command == "report":
        put("result", args.result)
        put("kind", args.kind)
        put("feature", args.feature)
        put("metric", args.metric)
        put("aggregate", args.aggregate)
        put("sense", args.sense)
        if args.svg:
            opts["svg"] = True
        opts.setdefault("aggregate", "slope")
        opts.setdefault("svg", False)
        if opts.get("kind") not in REPORT_KINDS:
            raise UsageError(f"--kind must be one of {REPORT_KINDS}")
        if "result" not in opts:
            raise UsageError("report needs a result directory")
    elif args.command == "detect":
        put("result", args.result)
        put("metric", args.metric)
        put("reported", args.reported)
        put("alpha", args.alpha)
        put("min_accuracy", args.min_accuracy)
        opts.setdefault("alpha", 0.05)
        for key in ("result", "metric", "reported"):
            if key not in opts:
                raise UsageError(f"detect needs --{key}")
    return RunConfig(args.command, int(seed), opts)


# ---------------------------------------------------------------- commands


def cmd_simulate(rc: RunConfig, out: Path, timings: dict, workers: int) -> dict:
    spec = SimulationSpec.from_dict(rc.options["spec"])
    t = time.perf_counter()
    data = simulate_collinear(spec)
    data.to_csv(out / "data.csv")
    data.schema.save(out / "schema.json")
    timings["simulate"] = time.perf_counter() - t
    return {}


def _sense_for(result, feature, aggregate, sense) -> int:
    if sense is not None:
        return int(sense)
    # default: the attacker's direction, against the baseline's sign
    s = result.baseline.aggregate(feature, aggregate)
    return -1 if s >= 0 else 1


def cmd_search(rc: RunConfig, out: Path, timings: dict, workers: int) -> dict:
    o = rc.options
    schema = FeatureSchema.load(o["schema"])
    data = load_csv(o["data"], schema)
    space = SearchSpace.from_dict(o["space"])
    sp = split(data, o["test_fraction"], rc.seed)
    sample = draw_explain_sample(sp, o["background_size"], o["eval_size"], rc.seed)
    cfg = ExplainerConfig.auto(data.n_columns, rc.seed)

    t = time.perf_counter()
    result = run_search(space, sp, sample, rc.seed, cfg, workers)
    timings["search"] = time.perf_counter() - t

    names = result.feature_names
    if o["mode"] == "directed":
        p = dict(o["params"])
        feature = _feature_index(p.get("target_feature", o.get("feature")), names)
        aggregate = p.get("aggregate", "slope")
        lam = p.get("lambda", "auto")
        if lam == "auto":
            lam = suggest_lambda(result, feature, aggregate, p.get("lambda_denominator", "baseline"))
        params = DirectedParams(feature, float(lam), float(p.get("mu", 0.0)), p.get("baseline_sign"), aggregate)
        params, ranked = rank_directed(result.baseline, result.candidates, params)
        result = replace(result, candidates=tuple(ranked), mode="directed", params=params)
    save_result(result, out)

    if o["mode"] == "cherry":
        table = cherry_table(result, ks=sorted({1, int(o["top_k"])}))
        _write_rows(out / "cherry_summary.csv", list(table[0]), [list(r.values()) for r in table])
    else:
        j = result.params.target_feature
        _write_rows(out / "ranking.csv", ["position", "id", "family", "preprocess", "q_score", "accuracy",
                                          f"aggregate:{names[j]}", "obviousness"],
                    [[i + 1, c.id, c.config.family, c.config.preprocess, c.q_score, c.accuracy,
                      c.aggregate(j, result.params.aggregate), c.obviousness]
                     for i, c in enumerate(result.candidates)])
    inputs = {"data": o["data"], "schema": o["schema"]}
    return inputs


def _svg(out: Path, name: str, draw) -> None:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise UsageError("--svg needs matplotlib (pip install 'artifact[plot]')") from exc
    matplotlib.rcParams["svg.hashsalt"] = "xhack"
    fig, ax = plt.subplots(figsize=(6, 4))
    draw(ax)
    fig.tight_layout()
    fig.savefig(out / name, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_report(rc: RunConfig, out: Path, timings: dict, workers: int) -> dict:
    o = rc.options
    result = load_result(o["result"])
    names = list(result.feature_names)
    kind = o["kind"]
    aggregate = o["aggregate"]
    t = time.perf_counter()
    if kind == "importance-change":
        rows = relative_change_rows(result)
        _write_rows(out / "importance_change.csv", ["id", *names], rows)
        if o["svg"]:
            def draw(ax):
                ax.violinplot([[r[1 + j] for r in rows] for j in range(len(names))] if rows else [[0.0]])
                ax.set_xticks(range(1, len(names) + 1), names)
                ax.set_ylabel("baseline share - candidate share")
            _svg(out, "importance_change.svg", draw)
    else:
        if "feature" not in o and kind != "histogram":
            raise UsageError(f"report --kind {kind} needs --feature")
    if kind == "slopes":
        j = _feature_index(o["feature"], names)
        everyone = (result.baseline, *sorted(result.candidates, key=lambda c: c.id))
        rows = [[r.id, "baseline" if r is result.baseline else "candidate", r.accuracy,
                 float(r.slopes.slopes[j]), float(r.slopes.intercepts[j])] for r in everyone]
        rows = [[v if not (isinstance(v, float) and v != v) else None for v in row] for row in rows]
        _write_rows(out / "slope_lines.csv", ["id", "role", "accuracy", "slope", "intercept"], rows)
        if o["svg"]:
            def draw(ax):
                xs = result.feature_ranges[j] if result.feature_ranges else (0.0, 1.0)
                for r in rows:
                    if r[3] is None:
                        continue
                    ax.plot(xs, [r[4] + r[3] * x for x in xs], color="k" if r[1] == "baseline" else "0.6",
                            lw=2 if r[1] == "baseline" else 0.6)
                ax.set_xlabel(names[j])
                ax.set_ylabel("SHAP value (linear fit)")
            _svg(out, "slope_lines.svg", draw)
    elif kind == "pareto":
        j = _feature_index(o["feature"], names)
        sense = _sense_for(result, j, aggregate, o.get("sense"))
        pts = pareto_points(result, j, aggregate, sense)
        _write_rows(out / "pareto.csv", ["id", "accuracy", f"{aggregate}:{names[j]}", "rank", "front"],
                    [[p.config_id, p.accuracy, p.aggregate, p.rank, int(p.rank == 0)] for p in pts])
        _write_json(out / "pareto_summary.json", {
            "feature": names[j], "aggregate": aggregate, "sense": sense,
            "baseline_accuracy": result.baseline.accuracy,
            "baseline_aggregate": result.baseline.aggregate(j, aggregate),
            "range_at_baseline_accuracy": aggregate_range(result, j, aggregate),
        })
        if o["svg"]:
            def draw(ax):
                ax.scatter([p.aggregate for p in pts], [p.accuracy for p in pts],
                           c=["k" if p.rank == 0 else "0.7" for p in pts], s=12)
                ax.axhline(result.baseline.accuracy, ls="--", color="0.4", lw=0.8)
                ax.set_xlabel(f"{aggregate} of {names[j]}")
                ax.set_ylabel("accuracy")
            _svg(out, "pareto.svg", draw)
    elif kind == "histogram":
        metric = o.get("metric") or f"slope:{names[_feature_index(o.get('feature'), names)]}"
        dist = build_distribution(result, metric, source=str(o["result"]))
        dist.to_csv(out / "histogram_values.csv")
        _write_json(out / "histogram.json", dist.histogram())
        if o["svg"]:
            def draw(ax):
                ax.hist(dist.values, bins=20, color="0.5")
                ax.set_xlabel(metric)
                ax.set_ylabel("pipelines")
            _svg(out, "histogram.svg", draw)
    timings["report"] = time.perf_counter() - t
    return {"result_manifest": str(Path(o["result"]) / "manifest.json")}


def cmd_detect(rc: RunConfig, out: Path, timings: dict, workers: int) -> dict:
    o = rc.options
    result = load_result(o["result"])
    t = time.perf_counter()
    dist = build_distribution(result, o["metric"], o.get("min_accuracy"), source=str(o["result"]))
    report = locate(dist, float(o["reported"]), float(o["alpha"]))
    save_report(report, dist, out)
    timings["detect"] = time.perf_counter() - t
    print(report.verdict())
    return {"result_manifest": str(Path(o["result"]) / "manifest.json")}


COMMANDS = {"simulate": cmd_simulate, "search": cmd_search, "report": cmd_report, "detect": cmd_detect}


# ---------------------------------------------------------------- argv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xhack", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"xhack {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="replay a run_config.json (flags given here override it)")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("simulate", help="write a collinear simulated dataset")
    p.add_argument("spec", nargs="?", help="simulation spec JSON (file or inline)")
    common(p)

    p = sub.add_parser("search", help="run a cherry-picking or directed search")
    p.add_argument("--data")
    p.add_argument("--schema")
    p.add_argument("--space", help="search space JSON (file or inline)")
    p.add_argument("--mode", choices=("cherry", "directed"))
    p.add_argument("--params", help="directed parameters JSON (file or inline)")
    p.add_argument("--budget", type=int)
    p.add_argument("--feature", help="feature of interest (name or index)")
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("--background-size", dest="background_size", type=int)
    p.add_argument("--eval-size", dest="eval_size", type=int)
    common(p)

    p = sub.add_parser("report", help="export figure data from a search result")
    p.add_argument("result", nargs="?", help="search result directory")
    p.add_argument("--kind", choices=REPORT_KINDS)
    p.add_argument("--feature")
    p.add_argument("--metric")
    p.add_argument("--aggregate", choices=("slope", "mean-signed-shap"))
    p.add_argument("--sense", type=int, choices=(-1, 1))
    p.add_argument("--svg", action="store_true", help="also render static SVG (needs matplotlib)")
    common(p)

    p = sub.add_parser("detect", help="locate a reported metric in the search distribution")
    p.add_argument("result", nargs="?", help="search result directory")
    p.add_argument("--metric", help="e.g. slope:f1, share:f1, rank:f1, mean_shap:f1")
    p.add_argument("--reported", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--min-accuracy", dest="min_accuracy", type=float)
    common(p)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.json").unlink(missing_ok=True)
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        rc = resolve(args)
        _write_json(out / "run_config.json", rc.to_dict())
        timings: dict[str, float] = {}
        t0 = time.perf_counter()
        inputs = COMMANDS[rc.command](rc, out, timings, args.workers)
        timings["total"] = time.perf_counter() - t0
        hashes = {k: _sha256(v) for k, v in sorted(inputs.items())}
        _write_json(out / "run_manifest.json", {
            "tool": "xhack", "version": __version__, "command": rc.command, "seed": rc.seed,
            "input_sha256": hashes, "timings_file": "timings.json",
        })
        _write_json(out / "timings.json", {k: round(v, 6) for k, v in timings.items()})
    except Exception as exc:  # every failure becomes a structured error
        err = {"command": args.command, "error": type(exc).__name__, "message": str(exc)}
        try:
            _write_json(out / "error.json", err)
        except OSError:
            pass
        print(json.dumps(err), file=sys.stderr)
        if args.verbose:
            log.exception("command failed")
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

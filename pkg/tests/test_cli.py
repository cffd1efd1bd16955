import csv
import json

import numpy as np
import pytest

from xhacking.cli import main
from xhacking.search import load_result, non_dominated_sort

SPACE = {"families": ["decision-tree", "logistic-regression", "gaussian-naive-bayes"], "budget": 5}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "spec.json").write_text(json.dumps({"n_rows": 150, "sigma1": 0.1, "sigma2": 0.1, "seed": 3}))
    (root / "space.json").write_text(json.dumps(SPACE))
    assert main(["simulate", str(root / "spec.json"), "--out", str(root / "sim")]) == 0
    return root


def search_args(root, out, *extra):
    return ["search", "--data", str(root / "sim" / "data.csv"), "--schema", str(root / "sim" / "schema.json"),
            "--space", str(root / "space.json"), "--background-size", "20", "--eval-size", "20",
            "--out", str(out), *extra]


@pytest.fixture(scope="module")
def cherry_dir(workdir):
    out = workdir / "cherry"
    assert main(search_args(workdir, out, "--workers", "1")) == 0
    return out


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_simulate_outputs(workdir, tmp_path):
    rows = read_csv(workdir / "sim" / "data.csv")
    assert len(rows) == 150
    for name in ("schema.json", "run_config.json", "run_manifest.json", "timings.json"):
        assert (workdir / "sim" / name).exists()
    (tmp_path / "s0.json").write_text(json.dumps({"n_rows": 40}))
    assert main(["simulate", str(tmp_path / "s0.json"), "--out", str(tmp_path / "a")]) == 0
    rows = read_csv(tmp_path / "a" / "data.csv")
    assert all(float(r["f2"]) == 2 * float(r["f1"]) for r in rows)
    assert main(["simulate", "--config", str(tmp_path / "a" / "run_config.json"), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "data.csv").read_bytes() == (tmp_path / "b" / "data.csv").read_bytes()


def test_search_outputs(cherry_dir):
    manifest = json.loads((cherry_dir / "run_manifest.json").read_text())
    assert manifest["seed"] == 42 and set(manifest["input_sha256"]) == {"data", "schema"}
    table = read_csv(cherry_dir / "cherry_summary.csv")
    assert [r["feature"] for r in table] == ["f0", "f1", "f2"]
    assert {"proportion_k1", "proportion_k3", "proportion_slope_flip"} <= set(table[0])
    assert len(read_csv(cherry_dir / "summary.csv")) == 6


def test_search_replay_and_workers(workdir, cherry_dir):
    out = workdir / "replay"
    assert main(["search", "--config", str(cherry_dir / "run_config.json"), "--out", str(out), "--workers", "2"]) == 0
    files = sorted(p.relative_to(cherry_dir) for p in cherry_dir.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(out) for p in out.rglob("*") if p.is_file())
    for f in files:
        if f.name != "timings.json":
            assert (cherry_dir / f).read_bytes() == (out / f).read_bytes(), f


def test_directed_search(workdir):
    out = workdir / "directed"
    params = json.dumps({"target_feature": "f1", "lambda": 0.5})
    assert main(search_args(workdir, out, "--mode", "directed", "--params", params, "--workers", "1")) == 0
    rows = read_csv(out / "ranking.csv")
    qs = [float(r["q_score"]) for r in rows if r["q_score"]]
    assert qs == sorted(qs, reverse=True)
    res = load_result(out)
    assert res.mode == "directed" and res.params.lam == 0.5 and res.params.baseline_sign in (-1, 1)


def test_errors_are_structured(workdir, tmp_path):
    out = tmp_path / "bad"
    assert main(search_args(workdir, out, "--budget", "0")) != 0
    err = json.loads((out / "error.json").read_text())
    assert err["command"] == "search" and "budget" in err["message"]
    assert main(["detect", str(tmp_path), "--metric", "slope:f1", "--reported", "0", "--out", str(tmp_path / "d")]) != 0
    assert (tmp_path / "d" / "error.json").exists()
    assert main(search_args(workdir, tmp_path / "m", "--mode", "directed")) != 0


def test_report_kinds(cherry_dir, tmp_path):
    res = load_result(cherry_dir)
    assert main(["report", str(cherry_dir), "--kind", "importance-change", "--out", str(tmp_path / "ic")]) == 0
    for row in read_csv(tmp_path / "ic" / "importance_change.csv"):
        assert abs(sum(float(row[n]) for n in ("f0", "f1", "f2"))) < 1e-9

    assert main(["report", str(cherry_dir), "--kind", "slopes", "--feature", "f1", "--out", str(tmp_path / "sl")]) == 0
    rows = read_csv(tmp_path / "sl" / "slope_lines.csv")
    assert rows[0]["role"] == "baseline" and len(rows) == 1 + len(res.candidates)

    assert main(["report", str(cherry_dir), "--kind", "pareto", "--feature", "f1", "--sense", "-1",
                 "--out", str(tmp_path / "pa")]) == 0
    rows = read_csv(tmp_path / "pa" / "pareto.csv")
    pts = [(float(r["accuracy"]), float(r["slope:f1"])) for r in rows]
    oracle = non_dominated_sort(pts, (True, False))
    assert [int(r["rank"]) for r in rows] == oracle
    assert [int(r["front"]) for r in rows] == [int(k == 0) for k in oracle]

    assert main(["report", str(cherry_dir), "--kind", "histogram", "--metric", "share:f0",
                 "--out", str(tmp_path / "hi")]) == 0
    assert (tmp_path / "hi" / "histogram.json").exists()
    assert main(["report", str(cherry_dir), "--kind", "slopes", "--feature", "zz", "--out", str(tmp_path / "e")]) != 0


def test_report_svg(cherry_dir, tmp_path):
    pytest.importorskip("matplotlib")
    assert main(["report", str(cherry_dir), "--kind", "pareto", "--feature", "f1", "--svg",
                 "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "pareto.svg").read_text().lstrip().startswith("<?xml")


def test_detect(cherry_dir, tmp_path, capsys):
    res = load_result(cherry_dir)
    vals = sorted(c.importance.shares[1] for c in res.candidates
                  if c.accuracy >= res.baseline.accuracy and not c.degenerate)
    median = float(np.median(vals))
    assert main(["detect", str(cherry_dir), "--metric", "share:f1", "--reported", repr(median),
                 "--min-accuracy", "0", "--out", str(tmp_path / "a")]) == 0
    assert "not flagged" in capsys.readouterr().out
    assert main(["detect", str(cherry_dir), "--metric", "share:f1", "--reported", "2.0",
                 "--min-accuracy", "0", "--out", str(tmp_path / "b")]) == 0
    rep = json.loads((tmp_path / "b" / "tail_report.json").read_text())
    assert rep["flagged"] and rep["empirical_percentile"] == 1.0

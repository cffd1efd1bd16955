"""Search over the pipeline space: undirected cherry-picking, directed
weighted-sum scoring, and Pareto analysis of the evaluated candidates.

Every candidate is a pure function of (config, split, sample, explainer), so
results are keyed by config id and never depend on the worker count.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import zoo
from .shapley import ExplainerConfig, explain_set
from .summary import (DEFAULT_TOP_K, SLOPE_ZERO_BAND, ImportanceSummary, SlopeSummary, importance,
                      relative_change, slope_sign, slope_summary, topple_check)
from .tabular import ExplainSample, SplitDataset

log = logging.getLogger(__name__)

RESULT_FORMAT = "xhacking.search-result"
RESULT_VERSION = 1
AGGREGATES = ("slope", "mean-signed-shap")


class SearchError(RuntimeError):
    """The search cannot produce a result (bad space, every candidate failed)."""


# ---------------------------------------------------------------- space


@dataclass(frozen=True)
class SearchSpace:
    """Families, per-family hyperparameter ranges, preprocessing and budget.

    ``ranges`` maps family -> hyperparameter -> ``[low, high]`` for numeric
    parameters or a list of choices for categorical ones. Anything not listed
    uses the full range declared by the zoo.
    """

    families: tuple[str, ...] = zoo.FAMILIES
    ranges: Mapping[str, Mapping[str, tuple]] = field(default_factory=dict)
    preprocess: tuple[str, ...] = zoo.PREPROCESS
    budget: int = 50
    per_config_time_limit: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "preprocess", tuple(self.preprocess))
        if not self.families:
            raise SearchError("search space has no families")
        if not self.preprocess:
            raise SearchError("search space has no preprocessing options")
        if int(self.budget) != self.budget or self.budget < 1:
            raise SearchError(f"budget must be a positive integer, got {self.budget!r}")
        if self.per_config_time_limit is not None and not self.per_config_time_limit > 0:
            raise SearchError("per_config_time_limit must be positive")
        for fam in self.families:
            if fam not in zoo.FAMILY_SCHEMAS:
                raise SearchError(f"unknown family {fam!r}")
        for p in self.preprocess:
            if p not in zoo.PREPROCESS:
                raise SearchError(f"unknown preprocess {p!r}")
        clean: dict[str, dict[str, tuple]] = {}
        for fam, params in self.ranges.items():
            if fam not in self.families:
                raise SearchError(f"ranges given for {fam!r}, which is not in the space")
            clean[fam] = {}
            for name, rng in params.items():
                try:
                    spec = zoo.param_spec(fam, name)
                except KeyError as exc:
                    raise SearchError(str(exc)) from None
                rng = tuple(rng)
                if spec.kind == "categorical":
                    if not rng or any(c not in spec.choices for c in rng):
                        raise SearchError(f"{fam}.{name}: choices {rng} not within {spec.choices}")
                else:
                    if len(rng) != 2 or not (spec.contains(rng[0]) and spec.contains(rng[1])) or rng[0] > rng[1]:
                        raise SearchError(f"{fam}.{name}: range {rng} not within [{spec.low}, {spec.high}]")
                clean[fam][name] = rng
        object.__setattr__(self, "ranges", clean)

    def to_dict(self) -> dict:
        return {
            "families": list(self.families),
            "ranges": {f: {k: list(v) for k, v in sorted(p.items())} for f, p in sorted(self.ranges.items())},
            "preprocess": list(self.preprocess),
            "budget": self.budget,
            "per_config_time_limit": self.per_config_time_limit,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SearchSpace":
        known = {"families", "ranges", "preprocess", "budget", "per_config_time_limit"}
        extra = set(d) - known
        if extra:
            raise SearchError(f"unknown search-space keys {sorted(extra)}")
        return cls(
            tuple(d.get("families", zoo.FAMILIES)),
            dict(d.get("ranges", {})),
            tuple(d.get("preprocess", zoo.PREPROCESS)),
            d.get("budget", 50),
            d.get("per_config_time_limit"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "SearchSpace":
        return cls.from_dict(json.loads(Path(path).read_text()))


def sample_configs(space: SearchSpace, seed: int = 42) -> list[zoo.PipelineConfig]:
    """Draw ``space.budget`` configs with ids 1..budget.

    Per config: a family uniformly, then a preprocessing option uniformly, then
    each hyperparameter in schema order (log-uniform where declared). Every
    model is trained with the same ``seed``.
    """
    rng = np.random.default_rng(seed)
    out = []
    for cid in range(1, space.budget + 1):
        fam = space.families[int(rng.integers(len(space.families)))]
        pre = space.preprocess[int(rng.integers(len(space.preprocess)))]
        limits = space.ranges.get(fam, {})
        hp = {}
        for spec in zoo.FAMILY_SCHEMAS[fam]:
            r = limits.get(spec.name)
            if r is None:
                hp[spec.name] = spec.sample(rng)
            elif spec.kind == "categorical":
                hp[spec.name] = spec.sample(rng, choices=r)
            else:
                hp[spec.name] = spec.sample(rng, low=r[0], high=r[1])
        out.append(zoo.PipelineConfig(cid, fam, pre, hp, seed))
    return out


def obviousness(config: zoo.PipelineConfig) -> float:
    """Fraction of hyperparameters that differ from the family default.

    A placeholder penalty: 0 means a stock configuration, 1 means every knob
    was turned.
    """
    schema = zoo.FAMILY_SCHEMAS[config.family]
    resolved = config.resolved()
    changed = sum(resolved[p.name] != p.default for p in schema)
    return changed / len(schema)


# ---------------------------------------------------------------- evaluation


def _floats(a) -> list:
    return [None if not math.isfinite(v) else float(v) for v in np.asarray(a, dtype=float)]


@dataclass(frozen=True, eq=False)
class EvalResult:
    config: zoo.PipelineConfig
    accuracy: float
    importance: ImportanceSummary
    slopes: SlopeSummary
    mean_shap: np.ndarray
    obviousness: float
    q_score: float | None = None
    converged: bool = True

    @property
    def id(self) -> int:
        return self.config.id

    @property
    def degenerate(self) -> bool:
        return self.importance.degenerate

    def aggregate(self, feature: int, kind: str = "slope") -> float:
        """Signed summary of one feature's attributions; nan if undefined."""
        if kind == "slope":
            return float(self.slopes.slopes[feature])
        if kind == "mean-signed-shap":
            return float(self.mean_shap[feature])
        raise ValueError(f"unknown aggregate {kind!r}; expected one of {AGGREGATES}")

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "accuracy": self.accuracy,
            "importance": self.importance.to_dict(),
            "slopes": self.slopes.to_dict(),
            "mean_shap": _floats(self.mean_shap),
            "obviousness": self.obviousness,
            "q_score": self.q_score,
            "degenerate": self.degenerate,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvalResult":
        return cls(
            zoo.PipelineConfig.from_dict(d["config"]),
            float(d["accuracy"]),
            ImportanceSummary.from_dict(d["importance"]),
            SlopeSummary.from_dict(d["slopes"]),
            np.array([np.nan if v is None else v for v in d["mean_shap"]], dtype=float),
            float(d["obviousness"]),
            None if d.get("q_score") is None else float(d["q_score"]),
            bool(d.get("converged", True)),
        )


@dataclass(frozen=True)
class Failure:
    config_id: int
    family: str
    reason: str

    def to_dict(self) -> dict:
        return {"config_id": self.config_id, "family": self.family, "reason": self.reason}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Failure":
        return cls(int(d["config_id"]), d["family"], d["reason"])


def evaluate(config: zoo.PipelineConfig, split: SplitDataset, sample: ExplainSample,
             cfg: ExplainerConfig = ExplainerConfig()) -> EvalResult:
    """Train, score on the whole test split, explain the frozen sample, summarize."""
    model = zoo.train(config, split.train)
    acc = zoo.accuracy(model, split.test)
    shap = explain_set(model, split, sample, cfg)
    return EvalResult(
        config=config,
        accuracy=acc,
        importance=importance(shap),
        slopes=slope_summary(shap, split, sample),
        mean_shap=shap.values.mean(axis=0),
        obviousness=obviousness(config),
        converged=model.converged,
    )


_WORKER_CTX: tuple | None = None


def _init_worker(split, sample, cfg, time_limit):
    global _WORKER_CTX
    _WORKER_CTX = (split, sample, cfg, time_limit)
    threadpool_limits(1)


def _guarded(config, split, sample, cfg, time_limit):
    t0 = time.perf_counter()
    try:
        res = evaluate(config, split, sample, cfg)
    except Exception as exc:  # a failed candidate must never abort the run
        return Failure(config.id, config.family, f"{type(exc).__name__}: {exc}")
    if time_limit is not None and time.perf_counter() - t0 > time_limit:
        return Failure(config.id, config.family, f"timeout: exceeded {time_limit} s")
    return res


def _worker_task(config):
    return _guarded(config, *_WORKER_CTX)


def evaluate_many(configs: Sequence[zoo.PipelineConfig], split: SplitDataset, sample: ExplainSample,
                  cfg: ExplainerConfig = ExplainerConfig(), workers: int = 1,
                  time_limit: float | None = None) -> tuple[list[EvalResult], list[Failure]]:
    """Evaluate configs, in a process pool when ``workers > 1``.

    Returns successes and failures, each sorted by config id. BLAS is pinned to
    one thread in every process so floating-point results match across pools.
    """
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(split, sample, cfg, time_limit)) as pool:
            outcomes = list(pool.map(_worker_task, configs))
    else:
        with threadpool_limits(1):
            outcomes = [_guarded(c, split, sample, cfg, time_limit) for c in configs]
    results = sorted((o for o in outcomes if isinstance(o, EvalResult)), key=lambda r: r.id)
    failures = sorted((o for o in outcomes if isinstance(o, Failure)), key=lambda f: f.config_id)
    for f in failures:
        log.warning("config %d (%s) failed: %s", f.config_id, f.family, f.reason)
    return results, failures


# ---------------------------------------------------------------- results


@dataclass(frozen=True)
class DirectedParams:
    """Weights of the directed objective for target feature ``target_feature``.

    ``baseline_sign`` may be left as None and is then fixed from the baseline
    model during the search.
    """

    target_feature: int
    lam: float
    mu: float = 0.0
    baseline_sign: int | None = None
    aggregate: str = "slope"

    def __post_init__(self):
        if self.target_feature < 0:
            raise ValueError("target_feature must be a column index")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError("lambda must be finite and >= 0")
        if not (math.isfinite(self.mu) and self.mu >= 0):
            raise ValueError("mu must be finite and >= 0")
        if self.baseline_sign not in (None, -1, 1):
            raise ValueError("baseline_sign must be -1 or +1; a baseline with no signed effect cannot be flipped")
        if self.aggregate not in AGGREGATES:
            raise ValueError(f"unknown aggregate {self.aggregate!r}")

    def to_dict(self) -> dict:
        return {"target_feature": self.target_feature, "lambda": self.lam, "mu": self.mu,
                "baseline_sign": self.baseline_sign, "aggregate": self.aggregate}

    @classmethod
    def from_dict(cls, d: Mapping) -> "DirectedParams":
        known = {"target_feature", "lambda", "mu", "baseline_sign", "aggregate"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown directed-parameter keys {sorted(extra)}")
        return cls(int(d["target_feature"]), float(d.get("lambda", 0.0)), float(d.get("mu", 0.0)),
                   d.get("baseline_sign"), d.get("aggregate", "slope"))


@dataclass(frozen=True, eq=False)
class SearchResult:
    baseline: EvalResult
    candidates: tuple[EvalResult, ...]
    explain_sample: ExplainSample
    space: SearchSpace
    feature_names: tuple[str, ...]
    seed: int = 42
    explainer: ExplainerConfig = ExplainerConfig()
    failures: tuple[Failure, ...] = ()
    mode: str = "cherry"
    params: DirectedParams | None = None
    feature_ranges: tuple[tuple[float, float], ...] = ()  # (min, max) per feature over eval rows

    @property
    def best_by_accuracy(self) -> EvalResult:
        # the baseline has id 0, so it wins ties
        return min((self.baseline, *self.candidates), key=lambda r: (-r.accuracy, r.id))

    def candidate(self, cid: int) -> EvalResult:
        for c in self.candidates:
            if c.id == cid:
                return c
        raise KeyError(cid)


def _sign(value: float, zero_band: float = SLOPE_ZERO_BAND) -> int:
    return slope_sign(value, zero_band)


def run_search(space: SearchSpace, split: SplitDataset, sample: ExplainSample, seed: int = 42,
               cfg: ExplainerConfig | None = None, workers: int = 1) -> SearchResult:
    """Accuracy-only search: baseline plus ``space.budget`` sampled candidates."""
    cfg = cfg or ExplainerConfig.auto(split.train.n_columns, seed)
    base_cfg = zoo.baseline_config(seed)
    base, base_fail = evaluate_many([base_cfg], split, sample, cfg)
    if base_fail:
        raise SearchError(f"baseline failed: {base_fail[0].reason}")
    results, failures = evaluate_many(sample_configs(space, seed), split, sample, cfg, workers,
                                      space.per_config_time_limit)
    if not results:
        raise SearchError("every candidate failed")
    X = split.test.matrix[list(sample.eval_rows)]
    ranges = tuple((float(lo), float(hi)) for lo, hi in zip(X.min(axis=0), X.max(axis=0)))
    return SearchResult(base[0], tuple(results), sample, space, tuple(split.train.column_names),
                        seed, cfg, tuple(failures), feature_ranges=ranges)


# ---------------------------------------------------------------- cherry-picking


Condition = Callable[[EvalResult, EvalResult], bool]


@dataclass(frozen=True)
class CherryPick:
    candidates: tuple[EvalResult, ...]
    n_superior: int

    @property
    def proportion(self) -> float | None:
        """Share of accuracy-superior candidates meeting the condition; None if there are none."""
        return None if self.n_superior == 0 else len(self.candidates) / self.n_superior


def cherry_pick(result: SearchResult, condition: Condition) -> CherryPick:
    """Candidates strictly more accurate than the baseline that satisfy ``condition``.

    ``condition(baseline, candidate)`` decides the explanation criterion.
    Degenerate candidates never qualify.
    """
    superior = [c for c in result.candidates if c.accuracy > result.baseline.accuracy]
    chosen = [c for c in superior if not c.degenerate and condition(result.baseline, c)]
    return CherryPick(tuple(chosen), len(superior))


def topple_condition(feature: int, k: int = DEFAULT_TOP_K) -> Condition:
    def cond(base: EvalResult, cand: EvalResult) -> bool:
        return topple_check(base.importance, cand.importance, feature, k)
    return cond


def slope_flip_condition(feature: int, aggregate: str = "slope") -> Condition:
    """Candidate's signed aggregate has the opposite (non-zero) sign of the baseline's."""
    def cond(base: EvalResult, cand: EvalResult) -> bool:
        b = _sign(base.aggregate(feature, aggregate))
        return b != 0 and _sign(cand.aggregate(feature, aggregate)) == -b
    return cond


def cherry_table(result: SearchResult, ks: Sequence[int] = (1, DEFAULT_TOP_K)) -> list[dict]:
    """Per feature: count of superior candidates and the topple / flip proportions."""
    rows = []
    for j, name in enumerate(result.feature_names):
        row = {"feature": name, "baseline_rank": int(result.baseline.importance.ranks[j])}
        pick = None
        for k in ks:
            if k > len(result.feature_names):
                continue
            pick = cherry_pick(result, topple_condition(j, k))
            row[f"toppled_k{k}"] = len(pick.candidates)
            row[f"proportion_k{k}"] = pick.proportion
        flip = cherry_pick(result, slope_flip_condition(j))
        row["n_superior"] = flip.n_superior
        row["slope_flipped"] = len(flip.candidates)
        row["proportion_slope_flip"] = flip.proportion
        rows.append(row)
    return rows


# ---------------------------------------------------------------- directed search


def _dec(x: float) -> Decimal:
    return Decimal(repr(float(x)))


def lambda_bound(perf_best: float, perf_base: float, shap_base_magnitude: float) -> float:
    """Largest accuracy gap an explanation flip should be allowed to buy.

    Evaluated in decimal on the shortest float representations, so
    ``lambda_bound(0.9, 0.7, 1.0)`` is exactly ``0.2``.
    """
    if not shap_base_magnitude > 0:
        raise ValueError("shap_base_magnitude must be > 0")
    if perf_best < perf_base:
        raise ValueError("perf_best must be >= perf_base")
    return float((_dec(perf_best) - _dec(perf_base)) / _dec(shap_base_magnitude))


def suggest_lambda(result: SearchResult, feature: int, aggregate: str = "slope",
                   denominator: str = "baseline") -> float:
    """Starting lambda from a finished search.

    ``denominator="baseline"`` divides by the baseline's |aggregate|;
    ``"best"`` divides by the most accurate model's |aggregate| instead.
    """
    best = result.best_by_accuracy
    ref = {"baseline": result.baseline, "best": best}.get(denominator)
    if ref is None:
        raise ValueError("denominator must be 'baseline' or 'best'")
    mag = abs(ref.aggregate(feature, aggregate))
    if not math.isfinite(mag):
        raise ValueError("aggregate undefined for the reference model")
    return lambda_bound(best.accuracy, result.baseline.accuracy, mag)


def directed_score(candidate: EvalResult, params: DirectedParams) -> float:
    """Q = -sign(X_base)·λ·X + accuracy - μ·obviousness."""
    if params.baseline_sign is None:
        raise ValueError("baseline_sign is not resolved")
    if candidate.degenerate:
        raise ValueError(f"candidate {candidate.id} is degenerate")
    x = candidate.aggregate(params.target_feature, params.aggregate)
    if not math.isfinite(x):
        raise ValueError(f"aggregate of feature {params.target_feature} undefined for candidate {candidate.id}")
    return -params.baseline_sign * params.lam * x + candidate.accuracy - params.mu * candidate.obviousness


def _q_key(r: EvalResult):
    return (r.q_score is None, -(r.q_score if r.q_score is not None else 0.0), r.id)


def rank_directed(baseline: EvalResult, candidates: Sequence[EvalResult],
                  params: DirectedParams) -> tuple[DirectedParams, list[EvalResult]]:
    """Resolve the baseline sign, attach Q to every candidate and sort by it.

    Candidates without a defined score sort last, by id.
    """
    if params.baseline_sign is None:
        s = _sign(baseline.aggregate(params.target_feature, params.aggregate))
        if s == 0:
            raise SearchError("the baseline shows no signed effect for the target feature")
        params = replace(params, baseline_sign=s)
    scored = []
    for c in candidates:
        try:
            q = directed_score(c, params)
        except ValueError:
            q = None
        scored.append(replace(c, q_score=q))
    return params, sorted(scored, key=_q_key)


def directed_search(space: SearchSpace, split: SplitDataset, sample: ExplainSample,
                    params: DirectedParams, seed: int = 42, cfg: ExplainerConfig | None = None,
                    workers: int = 1) -> SearchResult:
    """Evaluate the sampled space and order candidates by the directed objective."""
    if params.target_feature >= split.train.n_columns:
        raise SearchError(f"target feature {params.target_feature} out of range")
    res = run_search(space, split, sample, seed, cfg, workers)
    params, ranked = rank_directed(res.baseline, res.candidates, params)
    return replace(res, candidates=tuple(ranked), mode="directed", params=params)


# ---------------------------------------------------------------- Pareto analysis


def non_dominated_sort(points, senses: Sequence[bool] | None = None) -> list[int]:
    """Front index per point (0 = non-dominated).

    ``senses[i]`` is True when objective i is maximized (the default for all).
    """
    P = np.asarray(points, dtype=float)
    if P.size == 0:
        return []
    if P.ndim != 2:
        raise ValueError("points must be a list of equal-length vectors")
    n, d = P.shape
    sgn = np.ones(d) if senses is None else np.where(np.asarray(senses, dtype=bool), 1.0, -1.0)
    if len(sgn) != d:
        raise ValueError("one sense flag per objective is required")
    P = P * sgn
    ge = (P[:, None, :] >= P[None, :, :]).all(axis=2)
    gt = (P[:, None, :] > P[None, :, :]).any(axis=2)
    dom = ge & gt  # dom[i, j]: i dominates j
    count = dom.sum(axis=0)
    rank = np.full(n, -1)
    front = np.flatnonzero(count == 0)
    r = 0
    while front.size:
        rank[front] = r
        count = count - dom[front].sum(axis=0)
        count[rank >= 0] = -1
        front = np.flatnonzero(count == 0)
        r += 1
    return rank.tolist()


@dataclass(frozen=True)
class ParetoPoint:
    config_id: int
    accuracy: float
    aggregate: float
    rank: int


def pareto_points(result: SearchResult, feature: int, aggregate: str = "slope",
                  sense: int = -1) -> list[ParetoPoint]:
    """Rank every candidate on (accuracy up, aggregate in direction ``sense``).

    ``sense=+1`` maximizes the aggregate and ``-1`` minimizes it. Candidates
    with an undefined aggregate are left out.
    """
    if sense not in (-1, 1):
        raise ValueError("sense must be -1 or +1")
    usable = [c for c in sorted(result.candidates, key=lambda c: c.id)
              if not c.degenerate and math.isfinite(c.aggregate(feature, aggregate))]
    pts = [(c.accuracy, c.aggregate(feature, aggregate)) for c in usable]
    ranks = non_dominated_sort(pts, (True, sense > 0))
    return [ParetoPoint(c.id, a, x, r) for c, (a, x), r in zip(usable, pts, ranks)]


def pareto_front(result: SearchResult, feature: int, aggregate: str = "slope",
                 sense: int = -1) -> list[EvalResult]:
    ids = {p.config_id for p in pareto_points(result, feature, aggregate, sense) if p.rank == 0}
    return [c for c in sorted(result.candidates, key=lambda c: c.id) if c.id in ids]


def aggregate_range(result: SearchResult, feature: int, aggregate: str = "slope",
                    min_accuracy: float | None = None) -> float:
    """Spread (max - min) of the aggregate among candidates at or above an accuracy.

    The threshold defaults to the baseline accuracy. Zero when fewer than two
    candidates qualify.
    """
    thr = result.baseline.accuracy if min_accuracy is None else min_accuracy
    vals = [c.aggregate(feature, aggregate) for c in result.candidates
            if c.accuracy >= thr and not c.degenerate]
    vals = [v for v in vals if math.isfinite(v)]
    return float(max(vals) - min(vals)) if len(vals) > 1 else 0.0


# ---------------------------------------------------------------- persistence


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def save_result(result: SearchResult, out: str | Path) -> Path:
    """Write the result directory: manifest, per-candidate JSON, CSV summaries."""
    out = Path(out)
    (out / "candidates").mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": RESULT_FORMAT,
        "version": RESULT_VERSION,
        "mode": result.mode,
        "seed": result.seed,
        "feature_names": list(result.feature_names),
        "space": result.space.to_dict(),
        "explainer": result.explainer.to_dict(),
        "explain_sample": result.explain_sample.to_dict(),
        "params": None if result.params is None else result.params.to_dict(),
        "baseline_id": result.baseline.id,
        "best_by_accuracy_id": result.best_by_accuracy.id,
        "candidate_ids": [c.id for c in result.candidates],
        "failures": [f.to_dict() for f in result.failures],
        "feature_ranges": [list(r) for r in result.feature_ranges],
    }
    _dump(manifest, out / "manifest.json")
    for r in (result.baseline, *result.candidates):
        _dump(r.to_dict(), out / "candidates" / f"{r.id:04d}.json")

    everyone = (result.baseline, *result.candidates)
    _write_csv(out / "summary.csv",
               ["id", "role", "family", "preprocess", "accuracy", "obviousness", "q_score",
                "degenerate", "converged"],
               [[r.id, "baseline" if r is result.baseline else "candidate", r.config.family,
                 r.config.preprocess, r.accuracy, r.obviousness, r.q_score, int(r.degenerate),
                 int(r.converged)] for r in everyone])
    names = list(result.feature_names)
    _write_csv(out / "shares.csv", ["id", *names],
               [[r.id, *map(float, r.importance.shares)] for r in everyone])
    _write_csv(out / "slopes.csv",
               ["id", *(f"slope:{n}" for n in names), *(f"intercept:{n}" for n in names),
                *(f"mean_shap:{n}" for n in names)],
               [[r.id, *_floats(r.slopes.slopes), *_floats(r.slopes.intercepts), *_floats(r.mean_shap)]
                for r in everyone])
    return out


def load_result(path: str | Path) -> SearchResult:
    path = Path(path)
    try:
        manifest = json.loads((path / "manifest.json").read_text())
    except FileNotFoundError:
        raise SearchError(f"{path} is not a search-result directory (no manifest.json)") from None
    if manifest.get("format") != RESULT_FORMAT or manifest.get("version") != RESULT_VERSION:
        raise SearchError(f"{path}: unsupported result format")

    def read(cid: int) -> EvalResult:
        return EvalResult.from_dict(json.loads((path / "candidates" / f"{cid:04d}.json").read_text()))

    ex = manifest["explainer"]
    return SearchResult(
        baseline=read(manifest["baseline_id"]),
        candidates=tuple(read(c) for c in manifest["candidate_ids"]),
        explain_sample=ExplainSample.from_dict(manifest["explain_sample"]),
        space=SearchSpace.from_dict(manifest["space"]),
        feature_names=tuple(manifest["feature_names"]),
        seed=int(manifest["seed"]),
        explainer=ExplainerConfig(ex["mode"], ex["coalition_budget"], ex["ridge_epsilon"], ex["seed"]),
        failures=tuple(Failure.from_dict(f) for f in manifest["failures"]),
        mode=manifest["mode"],
        params=None if manifest["params"] is None else DirectedParams.from_dict(manifest["params"]),
        feature_ranges=tuple(tuple(r) for r in manifest.get("feature_ranges", [])),
    )


def relative_change_rows(result: SearchResult) -> list[list]:
    """[id, change per feature] for each non-degenerate candidate (violin data)."""
    rows = []
    for c in sorted(result.candidates, key=lambda c: c.id):
        if c.degenerate or result.baseline.degenerate:
            continue
        rows.append([c.id, *map(float, relative_change(result.baseline.importance, c.importance))])
    return rows

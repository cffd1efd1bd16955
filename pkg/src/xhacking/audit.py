"""Auditing side: the distribution of an explanation metric over searched
pipelines, and where a reported value falls in it."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .search import EvalResult, SearchResult

METRIC_KINDS = ("slope", "share", "rank", "mean_shap")


class AuditError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MetricDistribution:
    metric_name: str
    values: np.ndarray  # sorted ascending
    min_accuracy: float
    source: str = ""
    config_ids: tuple[int, ...] = ()

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float))
        if v.size == 0:
            raise AuditError("distribution is empty")
        if not np.all(np.isfinite(v)):
            raise AuditError("distribution contains non-finite values")
        object.__setattr__(self, "values", v)

    def to_csv(self, path: str | Path) -> None:
        Path(path).write_text("".join(f"{x!r}\n" for x in self.values.tolist()))

    def histogram(self, bins: int = 20) -> dict:
        counts, edges = np.histogram(self.values, bins=bins)
        return {"metric": self.metric_name, "min_accuracy": self.min_accuracy, "source": self.source,
                "n": int(self.values.size), "edges": edges.tolist(), "counts": counts.tolist()}


@dataclass(frozen=True)
class TailReport:
    metric_name: str
    reported_value: float
    empirical_percentile: float
    two_sided_tail: float
    alpha: float
    outside_range: bool
    flagged: bool
    n: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def verdict(self) -> str:
        where = "outside the observed range" if self.outside_range else f"percentile {self.empirical_percentile:.3f}"
        tag = "FLAGGED" if self.flagged else "not flagged"
        return (f"{self.metric_name} = {self.reported_value:g}: {where}, two-sided tail "
                f"{self.two_sided_tail:.3f} over {self.n} pipelines -> {tag} at alpha={self.alpha:g}")


def parse_metric(metric: str, feature_names) -> tuple[str, int]:
    """Split ``kind:feature`` where feature is a column name or index."""
    kind, sep, feat = metric.partition(":")
    if not sep or kind not in METRIC_KINDS:
        raise AuditError(f"metric must look like <{'|'.join(METRIC_KINDS)}>:<feature>, got {metric!r}")
    names = list(feature_names)
    if feat in names:
        return kind, names.index(feat)
    try:
        j = int(feat)
    except ValueError:
        raise AuditError(f"unknown feature {feat!r}") from None
    if not 0 <= j < len(names):
        raise AuditError(f"feature index {j} out of range")
    return kind, j


def metric_value(r: EvalResult, kind: str, feature: int) -> float:
    if kind == "slope":
        return float(r.slopes.slopes[feature])
    if kind == "share":
        return float(r.importance.shares[feature])
    if kind == "rank":
        return float(r.importance.ranks[feature])
    if kind == "mean_shap":
        return float(r.mean_shap[feature])
    raise AuditError(f"unknown metric kind {kind!r}")


def build_distribution(result: SearchResult, metric: str, min_accuracy: float | None = None,
                       source: str = "") -> MetricDistribution:
    """Metric values of every candidate at or above ``min_accuracy``.

    The threshold defaults to the baseline accuracy. Degenerate candidates and
    those where the metric is undefined are skipped.
    """
    kind, j = parse_metric(metric, result.feature_names)
    thr = result.baseline.accuracy if min_accuracy is None else float(min_accuracy)
    ids, vals = [], []
    for c in sorted(result.candidates, key=lambda c: c.id):
        if c.accuracy < thr or c.degenerate:
            continue
        v = metric_value(c, kind, j)
        if math.isfinite(v):
            ids.append(c.id)
            vals.append(v)
    if not vals:
        raise AuditError(f"no candidate reaches accuracy {thr} with a defined {metric}")
    return MetricDistribution(metric, np.array(vals), thr, source, tuple(ids))


def locate(dist: MetricDistribution, reported: float, alpha: float = 0.05) -> TailReport:
    """Midrank percentile of ``reported`` among the distribution's values.

    percentile = (#below + #equal / 2) / n. A value outside [min, max] is
    flagged regardless of alpha.
    """
    if not 0 <= alpha <= 1:
        raise AuditError("alpha must lie in [0, 1]")
    v = dist.values
    n = v.size
    below = int(np.searchsorted(v, reported, side="left"))
    equal = int(np.searchsorted(v, reported, side="right")) - below
    p = (below + 0.5 * equal) / n
    tail = 2.0 * min(p, 1.0 - p)
    outside = bool(reported < v[0] or reported > v[-1])
    return TailReport(dist.metric_name, float(reported), p, tail, alpha, outside,
                      bool(tail < alpha or outside), n)


def save_report(report: TailReport, dist: MetricDistribution, out: str | Path, bins: int = 20) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    dist.to_csv(out / "distribution.csv")
    (out / "histogram.json").write_text(json.dumps(dist.histogram(bins), indent=2, sort_keys=True) + "\n")
    (out / "tail_report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")

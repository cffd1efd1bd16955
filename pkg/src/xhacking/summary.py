"""Global summaries of an attribution matrix: mean-|SHAP| importance, share
changes against a baseline, and linear dependence slopes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .shapley import ShapMatrix
from .tabular import ExplainSample, SplitDataset

SLOPE_ZERO_BAND = 1e-4
DEFAULT_TOP_K = 3


class SlopeUndefined(ValueError):
    """The feature does not vary over the explained rows."""


@dataclass(frozen=True, eq=False)
class ImportanceSummary:
    mean_abs: np.ndarray
    shares: np.ndarray
    ranks: np.ndarray  # 1 = most important
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {"mean_abs": self.mean_abs.tolist(), "shares": self.shares.tolist(),
                "ranks": self.ranks.tolist(), "degenerate": self.degenerate}

    @classmethod
    def from_dict(cls, d: dict) -> "ImportanceSummary":
        return cls(np.array(d["mean_abs"], dtype=float), np.array(d["shares"], dtype=float),
                   np.array(d["ranks"], dtype=np.int64), bool(d["degenerate"]))


@dataclass(frozen=True, eq=False)
class SlopeSummary:
    slopes: np.ndarray  # nan where undefined
    intercepts: np.ndarray
    signs: np.ndarray
    zero_band: float = SLOPE_ZERO_BAND

    def to_dict(self) -> dict:
        def clean(a):
            return [None if not np.isfinite(v) else float(v) for v in a]
        return {"slope": clean(self.slopes), "intercept": clean(self.intercepts),
                "sign": self.signs.tolist(), "zero_band": self.zero_band}

    @classmethod
    def from_dict(cls, d: dict) -> "SlopeSummary":
        def arr(xs):
            return np.array([np.nan if v is None else v for v in xs], dtype=float)
        return cls(arr(d["slope"]), arr(d["intercept"]), np.array(d["sign"], dtype=np.int64),
                   float(d["zero_band"]))


def _values(shap) -> np.ndarray:
    return shap.values if isinstance(shap, ShapMatrix) else np.atleast_2d(np.asarray(shap, dtype=float))


def importance(shap) -> ImportanceSummary:
    V = _values(shap)
    if V.size == 0:
        raise ValueError("empty attribution matrix")
    mean_abs = np.abs(V).mean(axis=0)
    total = mean_abs.sum()
    degenerate = not total > 0
    shares = np.zeros_like(mean_abs) if degenerate else mean_abs / total
    order = np.lexsort((np.arange(len(mean_abs)), -mean_abs))
    ranks = np.empty(len(mean_abs), dtype=np.int64)
    ranks[order] = np.arange(1, len(mean_abs) + 1)
    return ImportanceSummary(mean_abs, shares, ranks, degenerate)


def relative_change(baseline: ImportanceSummary, candidate: ImportanceSummary) -> np.ndarray:
    """Baseline share minus candidate share per feature; positive = demoted."""
    if len(baseline.shares) != len(candidate.shares):
        raise ValueError("summaries have different feature counts")
    if baseline.degenerate or candidate.degenerate:
        raise ValueError("relative change is undefined for an all-zero attribution matrix")
    return baseline.shares - candidate.shares


def ols_line(x, y) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if not sxx > 0:
        raise SlopeUndefined("feature has zero variance over the explained rows")
    slope = float(xc @ (y - y.mean())) / sxx
    return slope, float(y.mean() - slope * x.mean())


def dependence_slope(shap: ShapMatrix, split: SplitDataset, sample: ExplainSample,
                     feature: int) -> tuple[float, float]:
    """Least-squares line of a feature's attributions on its raw values."""
    if not 0 <= feature < shap.values.shape[1]:
        raise IndexError(f"feature {feature} out of range")
    x = split.test.matrix[list(sample.eval_rows), feature]
    return ols_line(x, shap.values[:, feature])


def slope_sign(slope: float, zero_band: float = SLOPE_ZERO_BAND) -> int:
    if not np.isfinite(slope) or abs(slope) < zero_band:
        return 0
    return 1 if slope > 0 else -1


def slope_summary(shap: ShapMatrix, split: SplitDataset, sample: ExplainSample,
                  zero_band: float = SLOPE_ZERO_BAND) -> SlopeSummary:
    m = shap.values.shape[1]
    slopes, intercepts = np.full(m, np.nan), np.full(m, np.nan)
    for j in range(m):
        try:
            slopes[j], intercepts[j] = dependence_slope(shap, split, sample, j)
        except SlopeUndefined:
            pass
    signs = np.array([slope_sign(s, zero_band) for s in slopes], dtype=np.int64)
    return SlopeSummary(slopes, intercepts, signs, zero_band)


def topple_check(baseline: ImportanceSummary, candidate: ImportanceSummary, feature: int,
                 k: int = DEFAULT_TOP_K) -> bool:
    """True when the candidate ranks ``feature`` outside its top k.

    A degenerate candidate never satisfies the condition.
    """
    m = len(candidate.ranks)
    if len(baseline.ranks) != m:
        raise ValueError("summaries have different feature counts")
    if not 0 <= feature < m:
        raise IndexError(f"feature {feature} out of range")
    if not 1 <= k <= m:
        raise ValueError(f"k must lie in [1, {m}]")
    if candidate.degenerate:
        return False
    return bool(candidate.ranks[feature] > k)

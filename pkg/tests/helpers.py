"""Builders for hand-made search results."""

import numpy as np

from xhacking.search import EvalResult, SearchResult, SearchSpace
from xhacking.summary import SlopeSummary, importance, slope_sign
from xhacking.tabular import ExplainSample
from xhacking.zoo import PipelineConfig


def make_eval(cid, accuracy, mean_abs, slopes=None, family="decision-tree", hp=None, q=None):
    mean_abs = np.asarray(mean_abs, dtype=float)
    slopes = np.zeros(len(mean_abs)) if slopes is None else np.asarray(slopes, dtype=float)
    imp = importance(mean_abs[None, :])
    ss = SlopeSummary(slopes, np.zeros(len(slopes)), np.array([slope_sign(s) for s in slopes]))
    cfg = PipelineConfig(cid, family, "none", hp or {})
    return EvalResult(cfg, accuracy, imp, ss, slopes.copy(), 0.0, q)


def make_result(baseline, candidates, names=None):
    m = len(baseline.importance.shares)
    return SearchResult(baseline, tuple(candidates), ExplainSample((0,), (0,)), SearchSpace(budget=max(1, len(candidates))),
                        tuple(names or (f"x{j}" for j in range(m))))

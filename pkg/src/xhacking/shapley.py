"""Kernel SHAP attributions on the class-1 probability scale.

Absent features take background values (interventional value function)
and the base value is the mean prediction over the background. The
efficiency constraint is imposed exactly by eliminating the last feature's
attribution from the weighted least-squares problem, so the empty and full
coalitions never need finite stand-in weights.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .tabular import ExplainSample, SplitDataset

EFFICIENCY_TOL = 1e-6
EXACT_MAX_FEATURES = 16
ORACLE_MAX_FEATURES = 12
# target rows per model call; fixes how work is chunked independently of workers
ROWS_PER_CALL = 50_000

Predict = Callable[[np.ndarray], np.ndarray]


class ExplainError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ShapVector:
    values: np.ndarray
    base_value: float
    instance_output: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        object.__setattr__(self, "values", v)
        gap = abs(v.sum() + self.base_value - self.instance_output)
        if not gap <= EFFICIENCY_TOL:
            raise ExplainError(f"efficiency violated by {gap:.3g}")

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True, eq=False)
class ShapMatrix:
    values: np.ndarray  # (eval rows, features)
    base_values: np.ndarray
    outputs: np.ndarray
    feature_names: tuple[str, ...]
    sample: ExplainSample | None = None

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "values", V)
        object.__setattr__(self, "base_values", np.asarray(self.base_values, dtype=np.float64))
        object.__setattr__(self, "outputs", np.asarray(self.outputs, dtype=np.float64))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if V.shape[1] != len(self.feature_names):
            raise ExplainError("attribution width does not match feature_names")
        if self.sample is not None and V.shape[0] != self.sample.eval_size:
            raise ExplainError("row count does not match the explain sample")
        gap = np.abs(V.sum(axis=1) + self.base_values - self.outputs)
        if gap.size and not gap.max() <= EFFICIENCY_TOL:
            raise ExplainError(f"efficiency violated by {gap.max():.3g}")

    @classmethod
    def from_array(cls, values, feature_names=None) -> "ShapMatrix":
        """Wrap raw attributions (base value 0, outputs = row sums)."""
        V = np.atleast_2d(np.asarray(values, dtype=np.float64))
        names = feature_names or tuple(f"x{j}" for j in range(V.shape[1]))
        return cls(V, np.zeros(len(V)), V.sum(axis=1), names)

    @property
    def rows(self) -> list[ShapVector]:
        return [ShapVector(v, b, o) for v, b, o in zip(self.values, self.base_values, self.outputs)]

    def to_csv(self, path: str | Path) -> None:
        rows = self.sample.eval_rows if self.sample is not None else range(len(self.values))
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eval_row", *self.feature_names, "base_value"])
            for r, v, b in zip(rows, self.values, self.base_values):
                w.writerow([r, *(repr(float(x)) for x in v), repr(float(b))])


@dataclass(frozen=True)
class ExplainerConfig:
    mode: str = "exact"  # exact | sampled
    coalition_budget: int = 2048
    ridge_epsilon: float = 1e-6
    seed: int = 42

    def __post_init__(self):
        if self.mode not in ("exact", "sampled"):
            raise ValueError(f"unknown explainer mode {self.mode!r}")
        if self.ridge_epsilon < 0:
            raise ValueError("ridge_epsilon must be >= 0")

    def check(self, n_features: int) -> None:
        if self.mode == "exact" and n_features > EXACT_MAX_FEATURES:
            raise ExplainError(f"exact enumeration needs <= {EXACT_MAX_FEATURES} features, got {n_features}")
        if self.mode == "sampled" and self.coalition_budget < 2 * n_features:
            raise ExplainError(f"coalition_budget must be >= 2*M = {2 * n_features}")

    @classmethod
    def auto(cls, n_features: int, seed: int = 42, budget: int | None = None) -> "ExplainerConfig":
        """Exact enumeration for narrow data, sampled coalitions otherwise."""
        if n_features <= 10:
            return cls("exact", seed=seed)
        return cls("sampled", coalition_budget=budget or 2 * n_features + 2048, seed=seed)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "coalition_budget": self.coalition_budget,
                "ridge_epsilon": self.ridge_epsilon, "seed": self.seed}


def kernel_weight(m: int, size: int) -> float:
    return (m - 1) / (math.comb(m, size) * size * (m - size))


def all_coalitions(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Every proper, non-empty coalition with its Shapley kernel weight."""
    codes = np.arange(1, 2 ** m - 1)
    masks = ((codes[:, None] >> np.arange(m)) & 1).astype(bool)
    sizes = masks.sum(axis=1)
    lut = np.array([0.0] + [kernel_weight(m, s) for s in range(1, m)] + [0.0])
    return masks, lut[sizes]


def _size_masks(m: int, size: int) -> np.ndarray:
    out = np.zeros((math.comb(m, size), m), dtype=bool)
    for r, idx in enumerate(itertools.combinations(range(m), size)):
        out[r, list(idx)] = True
    return out


def sample_coalitions(m: int, budget: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Kernel-weighted coalition design within ``budget`` rows.

    Sizes are taken in complementary pairs (s, M-s) from the outside in; a
    pair is enumerated completely, at its exact kernel weight, while the
    budget still covers it. The remaining sizes are sampled in proportion to
    their kernel mass, each draw paired with its complement. Every draw then
    carries an equal share of the remaining mass, so repeats are merged with
    their counts. A budget that covers the whole lattice is plain enumeration.
    """
    if budget >= 2 ** m - 2:
        return all_coalitions(m)
    full_masks, full_w = [], []
    left = budget
    sizes = list(range(1, m))
    while sizes:
        pair = sorted({sizes[0], sizes[-1]})
        need = sum(math.comb(m, s) for s in pair)
        if need > left:
            break
        for s in pair:
            full_masks.append(_size_masks(m, s))
            full_w.append(np.full(math.comb(m, s), kernel_weight(m, s)))
            sizes.remove(s)
        left -= need
    parts_m, parts_w = full_masks, full_w
    n_pairs = left // 2
    if sizes and n_pairs:
        rest = np.array(sizes)
        mass = np.array([math.comb(m, s) * kernel_weight(m, s) for s in sizes])
        drawn = rng.choice(rest, size=n_pairs, p=mass / mass.sum())
        ranks = np.argsort(rng.random((n_pairs, m)), axis=1).argsort(axis=1)
        half = ranks < drawn[:, None]
        uniq, counts = np.unique(np.concatenate([half, ~half]), axis=0, return_counts=True)
        parts_m.append(uniq)
        parts_w.append(counts * (mass.sum() / (2 * n_pairs)))
    return np.concatenate(parts_m), np.concatenate(parts_w).astype(np.float64)


def _coalition_values(predict: Predict, X: np.ndarray, B: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """v[i, c] = mean over background of predict(x_i on coalition c, background elsewhere)."""
    k, m = X.shape
    nb, nc = len(B), len(masks)
    out = np.empty((k, nc))
    per_call = max(1, ROWS_PER_CALL // nb)
    if nc * nb <= ROWS_PER_CALL:
        inst_step = max(1, ROWS_PER_CALL // (nc * nb))
        for s in range(0, k, inst_step):
            xs = X[s:s + inst_step]
            rows = np.where(masks[None, :, None, :], xs[:, None, None, :], B[None, None, :, :])
            pred = np.asarray(predict(rows.reshape(-1, m)), dtype=np.float64)
            out[s:s + inst_step] = pred.reshape(len(xs), nc, nb).mean(axis=2)
        return out
    for i in range(k):
        for s in range(0, nc, per_call):
            mk = masks[s:s + per_call]
            rows = np.where(mk[:, None, :], X[i][None, None, :], B[None, :, :])
            pred = np.asarray(predict(rows.reshape(-1, m)), dtype=np.float64)
            out[i, s:s + per_call] = pred.reshape(len(mk), nb).mean(axis=1)
    return out


def _solve(masks, weights, values, fx, base, ridge) -> np.ndarray:
    """Constrained WLS for a block of instances sharing one coalition design."""
    m = masks.shape[1]
    delta = fx - base
    if m == 1:
        return delta[:, None].copy()
    Z = masks.astype(np.float64)
    A = Z[:, :-1] - Z[:, -1:]
    Y = values - base - np.outer(delta, Z[:, -1])
    G = A.T @ (weights[:, None] * A)
    R = (Y * weights) @ A
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > 1e12:
        if ridge <= 0:
            raise ExplainError("singular coalition system; set ridge_epsilon > 0")
        G = G + ridge * np.eye(m - 1)
    sol = np.linalg.solve(G, R.T).T
    return np.column_stack([sol, delta - sol.sum(axis=1)])


def _coalitions_for(m: int, cfg: ExplainerConfig, rng: np.random.Generator):
    if cfg.mode == "exact":
        return all_coalitions(m)
    return sample_coalitions(m, cfg.coalition_budget, rng)


def _prepare(instance, background):
    x = np.asarray(instance, dtype=np.float64).ravel()
    B = np.atleast_2d(np.asarray(background, dtype=np.float64))
    if B.shape[0] == 0:
        raise ExplainError("background is empty")
    if B.shape[1] != len(x):
        raise ExplainError(f"instance has {len(x)} features, background {B.shape[1]}")
    return x, B


def kernel_shap(predict: Predict, instance, background, cfg: ExplainerConfig = ExplainerConfig()) -> ShapVector:
    """Shapley attributions of one row by kernel-weighted least squares.

    ``predict`` maps an (n, M) array to n class-1 probabilities.
    """
    x, B = _prepare(instance, background)
    m = len(x)
    cfg.check(m)
    masks, weights = _coalitions_for(m, cfg, np.random.default_rng(cfg.seed))
    fx = np.asarray(predict(x[None, :]), dtype=np.float64)
    base = float(np.mean(predict(B)))
    vals = _coalition_values(predict, x[None, :], B, masks) if m > 1 else np.zeros((1, 0))
    phi = _solve(masks, weights, vals, fx, base, cfg.ridge_epsilon)
    return ShapVector(phi[0], base, float(fx[0]))


def exact_shapley(predict: Predict, instance, background) -> ShapVector:
    """Brute-force Shapley values over all 2^M coalitions (verification oracle)."""
    x, B = _prepare(instance, background)
    m = len(x)
    if m > ORACLE_MAX_FEATURES:
        raise ExplainError(f"exact_shapley supports at most {ORACLE_MAX_FEATURES} features")

    def value(subset: tuple[int, ...]) -> float:
        rows = B.copy()
        for j in subset:
            rows[:, j] = x[j]
        return float(np.mean(predict(rows)))

    v = {}
    for size in range(m + 1):
        for subset in itertools.combinations(range(m), size):
            v[subset] = value(subset)
    phi = np.zeros(m)
    for i in range(m):
        others = [j for j in range(m) if j != i]
        for size in range(m):
            w = math.factorial(size) * math.factorial(m - size - 1) / math.factorial(m)
            for S in itertools.combinations(others, size):
                with_i = tuple(sorted(S + (i,)))
                phi[i] += w * (v[with_i] - v[S])
    return ShapVector(phi, v[()], float(np.asarray(predict(x[None, :]))[0]))


def explain_set(model, split: SplitDataset, sample: ExplainSample,
                cfg: ExplainerConfig = ExplainerConfig(), workers: int = 1) -> ShapMatrix:
    """Explain every eval row against the shared background.

    Work is cut into instance blocks that depend only on the problem size, so
    the result is bit-identical for any ``workers``. In sampled mode each eval
    row draws coalitions from its own stream seeded by (cfg.seed, row).
    """
    sample.check(split)
    predict = model.predict_proba if hasattr(model, "predict_proba") else model
    B = split.train.matrix[list(sample.background_rows)]
    X = split.test.matrix[list(sample.eval_rows)]
    m = X.shape[1]
    cfg.check(m)
    base = float(np.mean(predict(B)))
    fx = np.asarray(predict(X), dtype=np.float64)
    names = split.train.column_names

    if m == 1:
        phi = (fx - base)[:, None]
        return ShapMatrix(phi, np.full(len(X), base), fx, names, sample)

    if cfg.mode == "exact":
        masks, weights = all_coalitions(m)
        step = max(1, ROWS_PER_CALL // (len(masks) * len(B)))

        def task(s: int) -> np.ndarray:
            sl = slice(s, s + step)
            vals = _coalition_values(predict, X[sl], B, masks)
            return _solve(masks, weights, vals, fx[sl], base, cfg.ridge_epsilon)

        starts = list(range(0, len(X), step))
    else:
        def task(i: int) -> np.ndarray:
            rng = np.random.default_rng([cfg.seed, sample.eval_rows[i]])
            masks, weights = sample_coalitions(m, cfg.coalition_budget, rng)
            vals = _coalition_values(predict, X[i:i + 1], B, masks)
            return _solve(masks, weights, vals, fx[i:i + 1], base, cfg.ridge_epsilon)

        starts = list(range(len(X)))

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(task, starts))
    else:
        parts = [task(s) for s in starts]
    phi = np.concatenate(parts, axis=0)
    return ShapMatrix(phi, np.full(len(X), base), fx, names, sample)


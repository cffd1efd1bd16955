"""Model zoo: the defensible pipeline families and the fixed baseline forest.

Tree ensembles, logistic regression and Gaussian naive Bayes are thin
wrappers around scikit-learn estimators; k-nearest-neighbours and all
preprocessing are implemented here so tie-breaking and degenerate columns
behave exactly as documented.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from sklearn.ensemble import GradientBoostingClassifier, RandomForestClassifier
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression
from sklearn.naive_bayes import GaussianNB
from sklearn.tree import DecisionTreeClassifier

from .tabular import Dataset

FORMAT_VERSION = 1
PREPROCESS = ("none", "standardize", "min-max", "pca-whiten")
LOGISTIC_MAX_ITER = 500


class TrainingError(RuntimeError):
    """Raised when a pipeline cannot be trained on the given data."""


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str  # int | real | categorical
    default: Any
    low: float | None = None
    high: float | None = None
    log: bool = False
    choices: tuple = ()

    def contains(self, value) -> bool:
        if self.kind == "categorical":
            return value in self.choices
        if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
            return False
        if self.kind == "int" and int(value) != value:
            return False
        return self.low <= value <= self.high

    def sample(self, rng: np.random.Generator, low=None, high=None, choices=None):
        if self.kind == "categorical":
            opts = tuple(choices) if choices is not None else self.choices
            return opts[int(rng.integers(len(opts)))]
        lo = self.low if low is None else low
        hi = self.high if high is None else high
        if self.kind == "int":
            return int(rng.integers(int(lo), int(hi) + 1))
        if lo == hi:
            return float(lo)
        if self.log:
            return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
        return float(rng.uniform(lo, hi))


def _int(name, lo, hi, default):
    return ParamSpec(name, "int", default, lo, hi)


def _real(name, lo, hi, default, log=False):
    return ParamSpec(name, "real", default, lo, hi, log)


def _cat(name, choices, default):
    return ParamSpec(name, "categorical", default, choices=tuple(choices))


# Defaults follow the usual library defaults; where that default lies outside
# the declared range (unlimited tree depth) the nearest bound is used.
FAMILY_SCHEMAS: dict[str, tuple[ParamSpec, ...]] = {
    "decision-tree": (
        _int("max_depth", 1, 20, 20),
        _int("min_samples_leaf", 1, 20, 1),
        _cat("criterion", ("gini", "entropy"), "gini"),
    ),
    "random-forest": (
        _int("n_estimators", 10, 200, 100),
        _cat("max_features", ("sqrt", "log2", "all"), "sqrt"),
        _int("min_samples_leaf", 1, 20, 1),
        _cat("criterion", ("gini", "entropy"), "gini"),
    ),
    "gradient-boosted-trees": (
        _int("n_estimators", 10, 200, 100),
        _real("learning_rate", 0.01, 0.5, 0.1, log=True),
        _int("max_depth", 1, 6, 3),
    ),
    "logistic-regression": (
        _real("l2_strength", 1e-4, 1e2, 1.0, log=True),
    ),
    "k-nearest-neighbours": (
        _int("n_neighbors", 1, 50, 5),
        _cat("weights", ("uniform", "distance"), "uniform"),
    ),
    "gaussian-naive-bayes": (
        _real("var_smoothing", 1e-12, 1e-6, 1e-9, log=True),
    ),
}
FAMILIES = tuple(FAMILY_SCHEMAS)


def param_spec(family: str, name: str) -> ParamSpec:
    for p in FAMILY_SCHEMAS[family]:
        if p.name == name:
            return p
    raise KeyError(f"{family} has no hyperparameter {name!r}")


@dataclass(frozen=True)
class PipelineConfig:
    id: int
    family: str
    preprocess: str = "none"
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 42

    def __post_init__(self):
        if self.family not in FAMILY_SCHEMAS:
            raise ValueError(f"unknown family {self.family!r}")
        if self.preprocess not in PREPROCESS:
            raise ValueError(f"unknown preprocess {self.preprocess!r}")
        hp = dict(self.hyperparameters)
        for name, value in hp.items():
            spec = param_spec(self.family, name)
            if not spec.contains(value):
                raise ValueError(f"{self.family}.{name}={value!r} outside its declared range")
            if spec.kind == "int":
                hp[name] = int(value)
            elif spec.kind == "real":
                hp[name] = float(value)
        object.__setattr__(self, "hyperparameters", hp)

    def resolved(self) -> dict[str, Any]:
        """Hyperparameters with unspecified entries filled by family defaults."""
        return {p.name: self.hyperparameters.get(p.name, p.default) for p in FAMILY_SCHEMAS[self.family]}

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "family": self.family,
            "preprocess": self.preprocess,
            "hyperparameters": dict(sorted(self.hyperparameters.items())),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(int(d["id"]), d["family"], d.get("preprocess", "none"),
                   dict(d.get("hyperparameters", {})), int(d.get("seed", 42)))


@dataclass(frozen=True, eq=False)
class Preprocessor:
    """Affine column transform ``((X - offset) / scale) @ projection``.

    Zero-variance (or zero-range) columns pass through untouched.
    """

    kind: str
    offset: np.ndarray
    scale: np.ndarray
    projection: np.ndarray | None = None

    @classmethod
    def fit(cls, kind: str, X: np.ndarray) -> "Preprocessor":
        m = X.shape[1]
        if kind == "none":
            return cls(kind, np.zeros(m), np.ones(m))
        if kind == "min-max":
            lo, hi = X.min(axis=0), X.max(axis=0)
            flat = hi - lo <= 0
            return cls(kind, np.where(flat, 0.0, lo), np.where(flat, 1.0, hi - lo))
        mean, std = X.mean(axis=0), X.std(axis=0)
        flat = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
        offset, scale = np.where(flat, 0.0, mean), np.where(flat, 1.0, std)
        if kind == "standardize":
            return cls(kind, offset, scale)
        if kind == "pca-whiten":
            Z = (X - offset) / scale
            Z = Z - Z.mean(axis=0)
            cov = Z.T @ Z / max(len(Z) - 1, 1)
            evals, evecs = np.linalg.eigh(cov)
            order = np.argsort(-evals, kind="stable")
            evals, evecs = evals[order], evecs[:, order]
            keep = evals > 1e-10 * max(evals[0], 1e-300)
            evals, evecs = evals[keep], evecs[:, keep]
            # eigenvector sign is arbitrary: make the largest loading positive
            pivot = np.argmax(np.abs(evecs), axis=0)
            evecs = evecs * np.sign(evecs[pivot, np.arange(evecs.shape[1])])
            return cls(kind, offset, scale, evecs / np.sqrt(evals))
        raise ValueError(f"unknown preprocess {kind!r}")

    def transform(self, X: np.ndarray) -> np.ndarray:
        Z = (X - self.offset) / self.scale
        if self.projection is not None:
            Z = Z @ self.projection
        return Z

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "offset": self.offset.tolist(), "scale": self.scale.tolist()}
        if self.projection is not None:
            out["projection"] = self.projection.tolist()
        return out


class NearestNeighbours:
    """k-NN class-1 probability; equal distances resolve to the lower row index."""

    def __init__(self, n_neighbors: int, weights: str = "uniform"):
        self.n_neighbors = n_neighbors
        self.weights = weights

    def fit(self, X: np.ndarray, y: np.ndarray) -> "NearestNeighbours":
        self.X_ = np.array(X, dtype=np.float64)
        self.y_ = np.asarray(y, dtype=np.float64)
        self.k_ = min(self.n_neighbors, len(self.y_))
        return self

    def predict_proba(self, Q: np.ndarray) -> np.ndarray:
        n_train, m = self.X_.shape
        out = np.empty(len(Q))
        chunk = max(1, 4_000_000 // max(n_train * m, 1))
        for s in range(0, len(Q), chunk):
            q = Q[s:s + chunk]
            d2 = ((q[:, None, :] - self.X_[None, :, :]) ** 2).sum(axis=-1)
            nn = np.argsort(d2, axis=1, kind="stable")[:, : self.k_]
            labels = self.y_[nn]
            if self.weights == "uniform":
                out[s:s + chunk] = labels.mean(axis=1)
                continue
            dist = np.sqrt(np.take_along_axis(d2, nn, axis=1))
            exact = dist == 0.0
            with np.errstate(divide="ignore"):
                w = np.where(exact.any(axis=1, keepdims=True), exact.astype(float), 1.0 / dist)
            out[s:s + chunk] = (w * labels).sum(axis=1) / w.sum(axis=1)
        return out


def _build_estimator(config: PipelineConfig):
    hp = config.resolved()
    seed = config.seed
    fam = config.family
    if fam == "decision-tree":
        return DecisionTreeClassifier(max_depth=hp["max_depth"], min_samples_leaf=hp["min_samples_leaf"],
                                      criterion=hp["criterion"], random_state=seed)
    if fam == "random-forest":
        mf = None if hp["max_features"] == "all" else hp["max_features"]
        return RandomForestClassifier(n_estimators=hp["n_estimators"], max_features=mf,
                                      min_samples_leaf=hp["min_samples_leaf"], criterion=hp["criterion"],
                                      bootstrap=True, n_jobs=1, random_state=seed)
    if fam == "gradient-boosted-trees":
        return GradientBoostingClassifier(n_estimators=hp["n_estimators"], learning_rate=hp["learning_rate"],
                                          max_depth=hp["max_depth"], random_state=seed)
    if fam == "logistic-regression":
        return LogisticRegression(C=1.0 / hp["l2_strength"], max_iter=LOGISTIC_MAX_ITER, random_state=seed)
    if fam == "k-nearest-neighbours":
        return NearestNeighbours(hp["n_neighbors"], hp["weights"])
    if fam == "gaussian-naive-bayes":
        return GaussianNB(var_smoothing=hp["var_smoothing"])
    raise ValueError(fam)


@dataclass(frozen=True, eq=False)
class TrainedPipeline:
    config: PipelineConfig
    preprocessor: Preprocessor
    model: Any
    train_fingerprint: str
    n_features: int
    converged: bool = True

    def predict_proba(self, rows: np.ndarray) -> np.ndarray:
        return predict_proba(self, rows)

    def to_dict(self) -> dict:
        return {
            "format": "xhacking.trained-pipeline",
            "version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "train_fingerprint": self.train_fingerprint,
            "n_features": self.n_features,
            "converged": self.converged,
            "preprocessor": self.preprocessor.to_dict(),
            "model": _export_model(self.config.family, self.model),
        }


def train(config: PipelineConfig, train_data: Dataset) -> TrainedPipeline:
    """Fit preprocessing and model on the training split only."""
    X, y = train_data.matrix, train_data.target
    if len(y) == 0:
        raise TrainingError("training set is empty")
    if y.min() == y.max():
        raise TrainingError("training set contains a single class")
    pre = Preprocessor.fit(config.preprocess, X)
    est = _build_estimator(config)
    converged = True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        est.fit(pre.transform(X), y)
    if config.family == "logistic-regression":
        converged = bool(est.n_iter_[0] < LOGISTIC_MAX_ITER)
    return TrainedPipeline(config, pre, est, train_data.fingerprint(), X.shape[1], converged)


def predict_proba(model: TrainedPipeline, rows: np.ndarray) -> np.ndarray:
    """Class-1 probability per row."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[None, :]
    if rows.ndim != 2 or rows.shape[1] != model.n_features:
        raise ValueError(f"expected rows with {model.n_features} columns, got shape {rows.shape}")
    Z = model.preprocessor.transform(rows)
    est = model.model
    if isinstance(est, NearestNeighbours):
        p = est.predict_proba(Z)
    else:
        p = est.predict_proba(Z)[:, 1]
    return np.clip(p, 0.0, 1.0)


def accuracy(model: TrainedPipeline, test: Dataset) -> float:
    if test.n_rows == 0:
        raise ValueError("empty test set")
    pred = (predict_proba(model, test.matrix) >= 0.5).astype(np.int64)
    return float(np.mean(pred == test.target))


BASELINE_ID = 0


def baseline_config(seed: int = 42) -> PipelineConfig:
    """Default forest: 100 trees, gini, unlimited depth, sqrt features, bootstrap."""
    return PipelineConfig(BASELINE_ID, "random-forest", "none", {}, seed)


def baseline(train_data: Dataset, seed: int = 42) -> TrainedPipeline:
    return train(baseline_config(seed), train_data)


def _export_tree(tree) -> dict:
    t = tree.tree_
    return {
        "children_left": t.children_left.tolist(),
        "children_right": t.children_right.tolist(),
        "feature": t.feature.tolist(),
        "threshold": t.threshold.tolist(),
        "value": t.value[:, 0, :].tolist(),
    }


def _export_model(family: str, est) -> dict:
    if family == "decision-tree":
        return {"tree": _export_tree(est)}
    if family == "random-forest":
        return {"trees": [_export_tree(t) for t in est.estimators_]}
    if family == "gradient-boosted-trees":
        return {
            "learning_rate": est.learning_rate,
            "init_prior": float(est.init_.class_prior_[1]),
            "trees": [_export_tree(t) for t in est.estimators_[:, 0]],
        }
    if family == "logistic-regression":
        return {"coef": est.coef_[0].tolist(), "intercept": float(est.intercept_[0]), "n_iter": int(est.n_iter_[0])}
    if family == "gaussian-naive-bayes":
        return {"theta": est.theta_.tolist(), "var": est.var_.tolist(), "class_prior": est.class_prior_.tolist()}
    if family == "k-nearest-neighbours":
        return {"k": est.k_, "weights": est.weights, "X": est.X_.tolist(), "y": est.y_.astype(int).tolist()}
    raise ValueError(family)


def replay(payload: Mapping, train_data: Dataset) -> TrainedPipeline:
    """Retrain from an exported pipeline and verify it reproduces exactly."""
    if payload.get("format") != "xhacking.trained-pipeline":
        raise ValueError("not an exported pipeline")
    if payload.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported pipeline format version {payload.get('version')}")
    if payload["train_fingerprint"] != train_data.fingerprint():
        raise ValueError("training data fingerprint does not match the export")
    model = train(PipelineConfig.from_dict(payload["config"]), train_data)
    if model.to_dict() != dict(payload):
        raise ValueError("replayed pipeline differs from the export")
    return model

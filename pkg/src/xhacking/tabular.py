"""Tabular binary-classification data: CSV ingestion, one-hot encoding,
stratified splitting, the collinear simulation and explanation samples."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed inputs or violated dataset preconditions."""


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str = "numeric"  # numeric | categorical
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise DataError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "categorical":
            if len(self.levels) < 2:
                raise DataError(f"categorical feature {self.name!r} needs >= 2 levels")
            if len(set(self.levels)) != len(self.levels):
                raise DataError(f"categorical feature {self.name!r} has repeated levels")


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[FeatureSpec, ...]
    target_name: str
    positive_label: str | None = None

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        if self.target_name in names:
            raise DataError("target column cannot also be a feature")
        if not names:
            raise DataError("schema has no features")

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def encoded_columns(self) -> list[str]:
        cols = []
        for f in self.features:
            if f.kind == "numeric":
                cols.append(f.name)
            else:
                cols.extend(f"{f.name}={lvl}" for lvl in f.levels)
        return cols

    def to_dict(self) -> dict:
        out = {
            "target": self.target_name,
            "features": [
                {"name": f.name, "kind": f.kind, **({"levels": list(f.levels)} if f.levels else {})}
                for f in self.features
            ],
        }
        if self.positive_label is not None:
            out["positive_label"] = self.positive_label
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        try:
            feats = tuple(
                FeatureSpec(f["name"], f.get("kind", "numeric"), tuple(str(x) for x in f.get("levels", ())))
                for f in d["features"]
            )
            pos = d.get("positive_label")
            return cls(feats, d["target"], None if pos is None else str(pos))
        except KeyError as e:
            raise DataError(f"schema is missing key {e}") from None

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSchema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Encoded feature matrix with a {0,1} target.

    ``row_ids`` are the original (pre-deletion) row indices, ``dropped_rows``
    the rows removed for missing values, and ``groups`` maps each source
    feature to its encoded column indices.
    """

    matrix: np.ndarray
    target: np.ndarray
    column_names: tuple[str, ...]
    source: str
    row_ids: np.ndarray | None = None
    dropped_rows: tuple[int, ...] = ()
    groups: dict[str, tuple[int, ...]] | None = None
    schema: FeatureSchema | None = None

    def __post_init__(self):
        X = np.asarray(self.matrix, dtype=np.float64)
        y = np.asarray(self.target)
        if X.ndim != 2:
            raise DataError("matrix must be 2-D")
        if y.ndim != 1 or len(y) != X.shape[0]:
            raise DataError("target length must equal matrix row count")
        if len(self.column_names) != X.shape[1]:
            raise DataError("column_names length must equal column count")
        if not np.all(np.isfinite(X)):
            raise DataError("matrix contains missing or non-finite values")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("target must be binary {0,1}")
        ids = np.arange(len(y)) if self.row_ids is None else np.asarray(self.row_ids, dtype=np.int64)
        if len(ids) != len(y):
            raise DataError("row_ids length must equal row count")
        groups = self.groups
        if groups is None:
            groups = {name: (j,) for j, name in enumerate(self.column_names)}
        object.__setattr__(self, "matrix", _frozen(X))
        object.__setattr__(self, "target", _frozen(y.astype(np.int64)))
        object.__setattr__(self, "row_ids", _frozen(ids))
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "groups", dict(groups))

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_columns(self) -> int:
        return self.matrix.shape[1]

    def subset(self, index: Sequence[int], tag: str) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(
            self.matrix[index],
            self.target[index],
            self.column_names,
            f"{self.source}[{tag}]",
            row_ids=self.row_ids[index],
            groups=self.groups,
            schema=self.schema,
        )

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.matrix).tobytes())
        h.update(np.ascontiguousarray(self.target).tobytes())
        h.update("\x1f".join(self.column_names).encode())
        return h.hexdigest()

    def column_index(self, feature: int | str) -> int:
        if isinstance(feature, str):
            try:
                return self.column_names.index(feature)
            except ValueError:
                raise DataError(f"unknown column {feature!r}") from None
        if not 0 <= feature < self.n_columns:
            raise DataError(f"column index {feature} out of range")
        return int(feature)

    def decode(self) -> list[dict[str, object]]:
        """Recover source-level feature values per row (inverse of one-hot)."""
        if self.schema is None:
            raise DataError("decode needs the dataset's schema")
        rows = []
        for r in range(self.n_rows):
            rec: dict[str, object] = {}
            for f in self.schema.features:
                cols = self.groups[f.name]
                if f.kind == "numeric":
                    rec[f.name] = float(self.matrix[r, cols[0]])
                else:
                    hot = self.matrix[r, list(cols)]
                    rec[f.name] = f.levels[int(np.argmax(hot))]
            rows.append(rec)
        return rows

    def to_csv(self, path: str | Path) -> None:
        """Write the encoded matrix and target; floats use round-trip repr."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*self.column_names, "target"])
            for row, t in zip(self.matrix, self.target):
                w.writerow([repr(float(v)) for v in row] + [int(t)])


def _is_missing(cell: str) -> bool:
    return cell.strip() == ""


def load_csv(path: str | Path, schema: FeatureSchema) -> Dataset:
    """Read a headed CSV, drop rows with any missing cell and one-hot encode."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except (UnicodeDecodeError, csv.Error) as e:
        raise DataError(f"malformed CSV {path}: {e}") from None
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    expected = set(schema.names) | {schema.target_name}
    if set(header) != expected or len(header) != len(expected):
        raise DataError(f"header {header} does not match schema columns {sorted(expected)}")
    pos = {name: header.index(name) for name in header}
    body = rows[1:]

    kept, dropped = [], []
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(f"row {i}: expected {len(header)} cells, found {len(row)}")
        if any(_is_missing(c) for c in row):
            dropped.append(i)
        else:
            kept.append(i)
    if not kept:
        raise DataError("no rows left after removing rows with missing values")

    labels = sorted({body[i][pos[schema.target_name]].strip() for i in kept})
    if len(labels) != 2:
        raise DataError(f"target {schema.target_name!r} must be binary, found labels {labels}")
    if schema.positive_label is not None:
        if schema.positive_label not in labels:
            raise DataError(f"positive label {schema.positive_label!r} not present in target")
        positive = schema.positive_label
    else:
        try:
            positive = max(labels, key=float)
        except ValueError:
            positive = labels[-1]

    columns = schema.encoded_columns()
    X = np.zeros((len(kept), len(columns)))
    y = np.zeros(len(kept), dtype=np.int64)
    groups: dict[str, tuple[int, ...]] = {}
    j = 0
    for f in schema.features:
        width = 1 if f.kind == "numeric" else len(f.levels)
        groups[f.name] = tuple(range(j, j + width))
        j += width
    for r, i in enumerate(kept):
        row = body[i]
        for f in schema.features:
            cell = row[pos[f.name]].strip()
            start = groups[f.name][0]
            if f.kind == "numeric":
                try:
                    X[r, start] = float(cell)
                except ValueError:
                    raise DataError(f"row {i}: {f.name}={cell!r} is not numeric") from None
                if not math.isfinite(X[r, start]):
                    raise DataError(f"row {i}: {f.name} is not finite")
            else:
                try:
                    X[r, start + f.levels.index(cell)] = 1.0
                except ValueError:
                    raise DataError(f"row {i}: unknown level {cell!r} for {f.name}") from None
        y[r] = int(row[pos[schema.target_name]].strip() == positive)

    note = f"csv:{path.name}"
    if dropped:
        note += f" dropped={dropped}"
    return Dataset(X, y, tuple(columns), note, row_ids=np.array(kept), dropped_rows=tuple(dropped),
                   groups=groups, schema=schema)


@dataclass(frozen=True, eq=False)
class SplitDataset:
    train: Dataset
    test: Dataset
    test_fraction: float
    seed: int
    train_index: np.ndarray = field(default=None)  # positions into the source dataset
    test_index: np.ndarray = field(default=None)


def split(data: Dataset, test_fraction: float = 0.2, seed: int = 42) -> SplitDataset:
    """Stratified train/test split, deterministic in (data, fraction, seed).

    The total test size is ``round(test_fraction * n)``; it is apportioned to
    the classes by largest remainder with every class keeping at least one row
    on each side.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError("test_fraction must lie in (0, 1)")
    y = data.target
    n = len(y)
    by_class = [np.flatnonzero(y == c) for c in (0, 1)]
    sizes = np.array([len(ix) for ix in by_class])
    if sizes.min() < 2:
        raise DataError(f"stratified split needs >= 2 rows per class, got {sizes.tolist()}")

    n_test = int(np.clip(round(test_fraction * n), 2, n - 2))
    quota = sizes * n_test / n
    take = np.floor(quota).astype(int)
    for c in np.argsort(-(quota - take), kind="stable")[: n_test - take.sum()]:
        take[c] += 1
    take = np.clip(take, 1, sizes - 1)
    # the per-class floor can overshoot the total; give rows back where the
    # quota is most exceeded (n_test >= 2 keeps this feasible)
    while take.sum() > n_test:
        c = int(np.argmax(np.where(take > 1, take - quota, -np.inf)))
        take[c] -= 1
    while take.sum() < n_test:
        c = int(np.argmax(np.where(take < sizes - 1, quota - take, -np.inf)))
        take[c] += 1

    rng = np.random.default_rng(seed)
    test_parts, train_parts = [], []
    for ix, k in zip(by_class, take):
        perm = rng.permutation(ix)
        test_parts.append(perm[:k])
        train_parts.append(perm[k:])
    test_index = np.sort(np.concatenate(test_parts))
    train_index = np.sort(np.concatenate(train_parts))
    return SplitDataset(
        data.subset(train_index, "train"),
        data.subset(test_index, "test"),
        float(test_fraction),
        int(seed),
        _frozen(train_index),
        _frozen(test_index),
    )


@dataclass(frozen=True)
class SimulationSpec:
    """Collinear generator: f0 ~ U(0,5), f1 = 10 f0 + N(0, sigma1),
    f2 = 20 f0 + N(0, sigma2), f3 = 3 f1 + 4 f2 + N(0, 0.01).

    ``independent`` names columns decoupled from the shared latent f0: each is
    generated from its own fresh U(0,5) draw (f0 itself becomes pure noise),
    so the column keeps whatever role it has in f3 but loses its redundancy.
    """

    n_rows: int = 1000
    sigma1: float = 0.0
    sigma2: float = 0.0
    target_rule: str | float = "median"
    seed: int = 42
    independent: tuple[str, ...] = ()

    def __post_init__(self):
        if int(self.n_rows) != self.n_rows or self.n_rows < 20:
            raise DataError("n_rows must be an integer >= 20")
        for s in (self.sigma1, self.sigma2):
            if not (math.isfinite(s) and s >= 0):
                raise DataError("sigmas must be finite and non-negative")
        if self.target_rule != "median" and not isinstance(self.target_rule, (int, float)):
            raise DataError("target_rule must be 'median' or a numeric threshold")
        bad = set(self.independent) - {"f0", "f1", "f2"}
        if bad:
            raise DataError(f"independent may only name f0, f1, f2; got {sorted(bad)}")
        object.__setattr__(self, "independent", tuple(self.independent))

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationSpec":
        known = {"n_rows", "sigma1", "sigma2", "target_rule", "seed", "independent"}
        extra = set(d) - known
        if extra:
            raise DataError(f"unknown simulation keys {sorted(extra)}")
        d = dict(d)
        if "independent" in d:
            d["independent"] = tuple(d["independent"])
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "target_rule": self.target_rule,
            "seed": self.seed,
            "independent": list(self.independent),
        }


SIM_COLUMNS = ("f0", "f1", "f2")


def simulate_collinear(spec: SimulationSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    n = spec.n_rows
    latent = rng.uniform(0.0, 5.0, n)
    e1 = rng.normal(0.0, spec.sigma1, n)
    e2 = rng.normal(0.0, spec.sigma2, n)
    e3 = rng.normal(0.0, 0.01, n)
    # fresh latents for decoupled columns are drawn after the shared stream so
    # that the non-independent columns are unchanged by the option
    own = {name: rng.uniform(0.0, 5.0, n) for name in SIM_COLUMNS if name in spec.independent}

    f0 = own.get("f0", latent)
    f1 = 10.0 * own.get("f1", latent) + e1
    f2 = 20.0 * own.get("f2", latent) + e2
    f3 = 3.0 * f1 + 4.0 * f2 + e3
    threshold = float(np.median(f3)) if spec.target_rule == "median" else float(spec.target_rule)
    y = (f3 > threshold).astype(np.int64)
    if y.min() == y.max():
        raise DataError("target rule produced a single class")
    tag = f"simulate:n={n},sigma1={spec.sigma1},sigma2={spec.sigma2},seed={spec.seed}"
    if spec.independent:
        tag += f",independent={','.join(spec.independent)}"
    schema = FeatureSchema(tuple(FeatureSpec(c) for c in SIM_COLUMNS), "target")
    return Dataset(np.column_stack([f0, f1, f2]), y, SIM_COLUMNS, tag, schema=schema)


@dataclass(frozen=True)
class ExplainSample:
    background_rows: tuple[int, ...]
    eval_rows: tuple[int, ...]

    def __post_init__(self):
        for name in ("background_rows", "eval_rows"):
            rows = tuple(int(i) for i in getattr(self, name))
            if len(set(rows)) != len(rows):
                raise DataError(f"{name} contains duplicates")
            if any(i < 0 for i in rows):
                raise DataError(f"{name} contains negative indices")
            object.__setattr__(self, name, rows)

    @property
    def background_size(self) -> int:
        return len(self.background_rows)

    @property
    def eval_size(self) -> int:
        return len(self.eval_rows)

    def check(self, data: SplitDataset) -> None:
        if self.background_rows and max(self.background_rows) >= data.train.n_rows:
            raise DataError("background row index outside the training split")
        if self.eval_rows and max(self.eval_rows) >= data.test.n_rows:
            raise DataError("eval row index outside the test split")

    def to_dict(self) -> dict:
        return {"background_rows": list(self.background_rows), "eval_rows": list(self.eval_rows)}

    @classmethod
    def from_dict(cls, d: dict) -> "ExplainSample":
        return cls(tuple(d["background_rows"]), tuple(d["eval_rows"]))


def draw_explain_sample(data: SplitDataset, background_size: int = 50, eval_size: int = 100,
                        seed: int = 42) -> ExplainSample:
    """Draw background rows from train and evaluation rows from test, without
    replacement. Both lists are returned sorted."""
    if background_size < 1 or eval_size < 1:
        raise DataError("sample sizes must be positive")
    if background_size > data.train.n_rows:
        raise DataError(f"background_size {background_size} > {data.train.n_rows} training rows")
    if eval_size > data.test.n_rows:
        raise DataError(f"eval_size {eval_size} > {data.test.n_rows} test rows")
    rng = np.random.default_rng(seed)
    bg = np.sort(rng.choice(data.train.n_rows, background_size, replace=False))
    ev = np.sort(rng.choice(data.test.n_rows, eval_size, replace=False))
    return ExplainSample(tuple(bg.tolist()), tuple(ev.tolist()))

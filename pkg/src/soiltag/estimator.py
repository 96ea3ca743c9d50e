"""Feature-to-moisture estimators: random-forest regression and a DTW matcher."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .features import ShapeError
from .soil import DomainError


class DegenerateDataError(ValueError):
    pass


# --- DTW --------------------------------------------------------------------


def dtw_distance(x, y) -> float:
    """Unconstrained DTW cost with |x_i - y_j| local cost and match/insert/delete steps."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size == 0 or y.size == 0:
        raise DomainError("DTW needs non-empty sequences")
    n, m = x.size, y.size
    cost = np.abs(x[:, None] - y[None, :])
    D = np.full((n + 1, m + 1), np.inf)
    D[0, 0] = 0.0
    for i in range(1, n + 1):
        row_prev = D[i - 1]
        row = D[i]
        ci = cost[i - 1]
        for j in range(1, m + 1):
            row[j] = ci[j - 1] + min(row_prev[j - 1], row_prev[j], row[j - 1])
    return float(D[n, m])


def dtw_estimate(profile, references) -> float:
    """Label of the nearest reference under DTW; ties go to the lower label.

    ``references`` is an iterable of ``(label, gains)`` pairs.
    """
    refs = [(float(lbl), np.asarray(getattr(g, "gain_db", g), dtype=float)) for lbl, g in references]
    if not refs:
        raise ValueError("no references to match against")
    q = np.asarray(getattr(profile, "gain_db", profile), dtype=float)
    best = None
    for lbl, g in refs:
        if g.shape != q.shape:
            raise ShapeError("reference and profile feature grids differ")
        key = (dtw_distance(q, g), lbl)
        if best is None or key < best:
            best = key
    return best[1]


# --- data -------------------------------------------------------------------


@dataclass
class Dataset:
    freqs: np.ndarray
    X: np.ndarray  # rows x features, filter gain dB
    y: np.ndarray  # moisture, percent
    meta: list = field(default_factory=list)  # one dict per row

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.X = np.asarray(self.X, dtype=float).reshape(-1, self.freqs.size)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.shape[0] != self.y.size:
            raise ShapeError("row count mismatch between features and labels")
        if not self.meta:
            self.meta = [{} for _ in range(self.y.size)]
        if len(self.meta) != self.y.size:
            raise ValueError("meta must have one entry per row")
        if np.any(self.y < 0) or np.any(self.y > 100):
            raise ValueError("labels must be moisture percentages in [0, 100]")

    def __len__(self):
        return self.y.size

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.freqs, self.X[idx], self.y[idx], [self.meta[i] for i in idx])

    def level_means(self) -> list[tuple[float, np.ndarray]]:
        return [(float(v), self.X[self.y == v].mean(axis=0)) for v in np.unique(self.y)]


def train_test_split(data: Dataset, train_fraction=0.5, seed=0) -> tuple[Dataset, Dataset]:
    n = len(data)
    perm = np.random.default_rng(seed).permutation(n)
    k = int(round(train_fraction * n))
    return data.subset(np.sort(perm[:k])), data.subset(np.sort(perm[k:]))


# --- forest -----------------------------------------------------------------


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = 12
    min_leaf: int = 2
    features_per_split: int | None = None  # None: ceil(sqrt(F))
    seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be >= 1")

    def resolved_mtry(self, n_features: int) -> int:
        k = self.features_per_split or math.ceil(math.sqrt(n_features))
        return min(k, n_features)


class Tree:
    """Flat-array regression tree; ``feature[i] == -1`` marks a leaf."""

    def __init__(self, feature, threshold, left, right, value, n_samples):
        self.feature = np.asarray(feature, dtype=int)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=int)
        self.right = np.asarray(right, dtype=int)
        self.value = np.asarray(value, dtype=float)
        self.n_samples = np.asarray(n_samples, dtype=int)

    @property
    def leaves(self) -> np.ndarray:
        return np.nonzero(self.feature < 0)[0]

    def apply(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        node = np.zeros(X.shape[0], dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self, i=0) -> dict:
        if self.feature[i] < 0:
            return {"value": float(self.value[i]), "n": int(self.n_samples[i])}
        return {
            "feature": int(self.feature[i]),
            "threshold": float(self.threshold[i]),
            "n": int(self.n_samples[i]),
            "left": self.to_dict(self.left[i]),
            "right": self.to_dict(self.right[i]),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        cols = {k: [] for k in ("feature", "threshold", "left", "right", "value", "n_samples")}

        def add(node):
            i = len(cols["feature"])
            for k in cols:
                cols[k].append(0)
            cols["n_samples"][i] = node["n"]
            if "value" in node:
                cols["feature"][i], cols["threshold"][i] = -1, 0.0
                cols["left"][i] = cols["right"][i] = -1
                cols["value"][i] = node["value"]
            else:
                cols["feature"][i], cols["threshold"][i] = node["feature"], node["threshold"]
                cols["value"][i] = float("nan")
                cols["left"][i] = add(node["left"])
                cols["right"][i] = add(node["right"])
            return i

        add(d)
        return cls(**cols)


def _best_split(Xn, yn, feats, min_leaf):
    """Largest SSE reduction over candidate features; None when nothing helps."""
    n = yn.size
    total = yn.sum()
    base = (yn * yn).sum() - total * total / n
    best = None
    for f in feats:
        order = np.argsort(Xn[:, f], kind="stable")
        xs = Xn[order, f]
        ys = yn[order]
        cs = np.cumsum(ys)[:-1]
        cs2 = np.cumsum(ys * ys)[:-1]
        nl = np.arange(1, n)
        nr = n - nl
        valid = (xs[1:] > xs[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
        if not valid.any():
            continue
        sse = (cs2 - cs * cs / nl) + ((cs2[-1] + ys[-1] ** 2 - cs2) - (total - cs) ** 2 / nr)
        sse = np.where(valid, sse, np.inf)
        k = int(np.argmin(sse))
        gain = base - sse[k]
        if gain > 1e-12 * max(base, 1e-300) and (best is None or gain > best[0]):
            best = (gain, f, 0.5 * (xs[k] + xs[k + 1]))
    return best


def build_tree(X, y, params: ForestParams, rng: np.random.Generator) -> Tree:
    n_features = X.shape[1]
    mtry = params.resolved_mtry(n_features)
    feature, threshold, left, right, value, n_samples = [], [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        n_samples.append(int(idx.size))
        return len(feature) - 1

    root = new_node(np.arange(y.size))
    stack = [(root, np.arange(y.size), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if idx.size < 2 * params.min_leaf or (params.max_depth is not None and depth >= params.max_depth):
            continue
        feats = rng.choice(n_features, size=mtry, replace=False)
        split = _best_split(X[idx], y[idx], feats, params.min_leaf)
        if split is None:
            continue
        _, f, t = split
        mask = X[idx, f] <= t
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = int(f), float(t)
        left[node], right[node] = new_node(li), new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(feature, threshold, left, right, value, n_samples)


@dataclass
class ForestModel:
    trees: list
    params: ForestParams
    n_features: int
    freqs: np.ndarray | None = None

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise ShapeError(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.mean([t.predict(X) for t in self.trees], axis=0)
        return float(out[0]) if single else out

    def to_json(self) -> str:
        doc = {
            "params": asdict(self.params),
            "n_features": self.n_features,
            "freqs_hz": None if self.freqs is None else [float(f) for f in self.freqs],
            "trees": [t.to_dict() for t in self.trees],
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ForestModel":
        doc = json.loads(text)
        freqs = doc.get("freqs_hz")
        return cls(
            trees=[Tree.from_dict(t) for t in doc["trees"]],
            params=ForestParams(**doc["params"]),
            n_features=int(doc["n_features"]),
            freqs=None if freqs is None else np.asarray(freqs, dtype=float),
        )


def train_forest(data: Dataset, params: ForestParams = ForestParams()) -> ForestModel:
    """Bagged CART regressors with per-node random feature subsets.

    Tree ``k`` draws its bootstrap and feature subsets from ``(seed, k)`` only,
    so trees are independent of build order.
    """
    X, y = data.X, data.y
    if y.size < 2:
        raise DegenerateDataError("need at least two rows to train")
    trees = []
    for k in range(params.n_trees):
        rng = np.random.default_rng([params.seed, k])
        idx = rng.integers(0, y.size, size=y.size) if params.bootstrap else np.arange(y.size)
        trees.append(build_tree(X[idx], y[idx], params, rng))
    return ForestModel(trees, params, X.shape[1], data.freqs)


def predict(model: ForestModel, features) -> float | np.ndarray:
    return model.predict(getattr(features, "gain_db", features))


# --- evaluation -------------------------------------------------------------


def nearest_rank(values, pct: float) -> float:
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("empty sample")
    r = max(1, math.ceil(pct / 100.0 * v.size))
    return float(v[r - 1])


@dataclass
class ErrorReport:
    errors: np.ndarray
    mean: float
    median: float
    p90: float
    cdf_error: np.ndarray
    cdf_fraction: np.ndarray

    def summary(self) -> dict:
        return {"n": int(self.errors.size), "mean": self.mean, "median": self.median, "p90": self.p90}


def error_report(predicted, truth) -> ErrorReport:
    err = np.abs(np.asarray(predicted, dtype=float) - np.asarray(truth, dtype=float))
    if err.size == 0:
        raise ValueError("empty test set")
    vals, counts = np.unique(err, return_counts=True)
    return ErrorReport(
        errors=err,
        mean=float(err.mean()),
        median=float(np.median(err)),
        p90=nearest_rank(err, 90),
        cdf_error=vals,
        cdf_fraction=np.cumsum(counts) / err.size,
    )


def evaluate(model: ForestModel, test: Dataset) -> ErrorReport:
    if len(test) == 0:
        raise ValueError("empty test set")
    return error_report(model.predict(test.X), test.y)

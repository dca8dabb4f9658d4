"""Second-order regression trees over numeric and categorical features.

Trees are grown depth-wise with an exact scan over the sorted unique values
of every feature.  A split maximizes

    gain = 1/2 [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)]

and leaves take the regularized Newton value ``-G / (H + lambda)``.
Categorical columns are turned into numeric features with ordered target
statistics before any tree sees them.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import kernels

#: relative margin by which a later feature's gain must beat the incumbent
SPLIT_TIE_RTOL = 1e-10

# --------------------------------------------------------------------------
# Data containers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """Column-oriented table of features, exposure and target.

    ``target`` may be ``None`` for scoring-only data.
    """

    numeric: Dict[str, np.ndarray]
    categorical: Dict[str, np.ndarray]
    exposure: np.ndarray
    target: Optional[np.ndarray] = None

    def __post_init__(self):
        exposure = np.asarray(self.exposure, dtype=np.float64)
        n = exposure.shape[0]
        numeric = {}
        for name, col in self.numeric.items():
            col = np.asarray(col, dtype=np.float64)
            if col.shape != (n,):
                raise ValueError(f"numeric column {name!r} has length {col.shape}, expected {n}")
            bad = np.flatnonzero(~np.isfinite(col))
            if bad.size:
                raise ValueError(f"numeric column {name!r} has a non-finite value at row {bad[0]}")
            numeric[name] = col
        categorical = {}
        for name, col in self.categorical.items():
            col = np.asarray(col).astype(str)
            if col.shape != (n,):
                raise ValueError(f"categorical column {name!r} has length {col.shape}, expected {n}")
            categorical[name] = col
        if set(numeric) & set(categorical):
            raise ValueError("a column cannot be both numeric and categorical")
        bad = np.flatnonzero(~(np.isfinite(exposure) & (exposure > 0)))
        if bad.size:
            raise ValueError(f"exposure must be positive and finite (row {bad[0]})")
        object.__setattr__(self, "numeric", numeric)
        object.__setattr__(self, "categorical", categorical)
        object.__setattr__(self, "exposure", exposure)
        if self.target is not None:
            target = np.asarray(self.target, dtype=np.float64)
            if target.shape != (n,):
                raise ValueError("target length does not match exposure")
            bad = np.flatnonzero(~(np.isfinite(target) & (target >= 0)))
            if bad.size:
                raise ValueError(f"target must be finite and non-negative (row {bad[0]})")
            object.__setattr__(self, "target", target)

    @property
    def n_rows(self) -> int:
        return int(self.exposure.shape[0])

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(
            numeric={k: v[rows] for k, v in self.numeric.items()},
            categorical={k: v[rows] for k, v in self.categorical.items()},
            exposure=self.exposure[rows],
            target=None if self.target is None else self.target[rows],
        )


@dataclass
class BoostConfig:
    n_trees: int = 500
    learning_rate: float = 0.1
    l2_lambda: float = 1.0
    max_depth: int = 10
    min_samples_leaf: int = 1
    hessian_floor: float = 1e-16
    #: refresh phi (and gamma) every k boosting iterations
    param_update_every: int = 1
    #: patience on the validation deviance; ``None`` disables early stopping
    early_stopping_rounds: Optional[int] = None
    #: starting mean score: "mean" (log claim rate) or "zero"
    init_score: str = "mean"

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be non-negative")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if not self.hessian_floor > 0:
            raise ValueError("hessian_floor must be positive")
        if self.param_update_every < 1:
            raise ValueError("param_update_every must be >= 1")
        if self.early_stopping_rounds is not None and self.early_stopping_rounds < 1:
            raise ValueError("early_stopping_rounds must be >= 1 or None")
        if self.init_score not in ("mean", "zero"):
            raise ValueError("init_score must be 'mean' or 'zero'")

    def to_dict(self):
        return asdict(self)


# --------------------------------------------------------------------------
# Ordered target statistics
# --------------------------------------------------------------------------

def target_buckets(y, edges):
    """Bucket 0 holds exact zeros; positive targets go to 1..len(edges)+1."""
    y = np.asarray(y, dtype=np.float64)
    b = 1 + np.searchsorted(np.asarray(edges, dtype=np.float64), y, side="right")
    return np.where(y == 0, 0, b).astype(np.intp)


def bucket_edges(y, n_buckets):
    """Inner quantile edges splitting the positive targets into K-1 buckets."""
    pos = np.asarray(y, dtype=np.float64)
    pos = pos[pos > 0]
    if pos.size == 0 or n_buckets <= 2:
        return np.zeros(0)
    qs = np.arange(1, n_buckets - 1) / (n_buckets - 1)
    return np.quantile(pos, qs)


def _prefix_counts(codes, buckets, perm, n_buckets):
    """Per row: (count of earlier same-class rows in each bucket, earlier same-class rows).

    "Earlier" refers to position in ``perm``.
    """
    n = codes.shape[0]
    seq = perm[np.argsort(codes[perm], kind="stable")]
    seq_codes = codes[seq]
    starts = np.flatnonzero(np.r_[True, seq_codes[1:] != seq_codes[:-1]])
    seg_len = np.diff(np.r_[starts, n])
    seg_start = np.repeat(starts, seg_len)
    total = np.empty(n, dtype=np.int64)
    total[seq] = np.arange(n) - seg_start
    in_class = np.empty((n, n_buckets), dtype=np.int64)
    seq_b = buckets[seq]
    for b in range(n_buckets):
        ind = (seq_b == b).astype(np.int64)
        cs = np.cumsum(ind)
        base = np.where(seg_start > 0, cs[seg_start - 1], 0)
        in_class[seq, b] = cs - ind - base
    return in_class, total


def ordered_ts_encode(dataset: Dataset, column: str, seed: int, K: int = 10,
                      prior: float = 0.5, edges=None) -> np.ndarray:
    """Ordered target statistics for one categorical column.

    Returns an ``(n_rows, K)`` array: column ``b`` is
    ``(countInClass_b + prior) / (totalCount + 1)`` where both counts only
    use rows that precede the current row in a seeded random permutation.
    Rows are returned in original order.
    """
    if dataset.n_rows == 0:
        raise ValueError("cannot encode an empty dataset")
    if K < 2:
        raise ValueError("K must be >= 2")
    if dataset.target is None:
        raise ValueError("ordered target statistics need a target")
    if edges is None:
        edges = bucket_edges(dataset.target, K)
    _, codes = np.unique(dataset.categorical[column], return_inverse=True)
    perm = np.random.default_rng(seed).permutation(dataset.n_rows)
    in_class, total = _prefix_counts(codes.astype(np.intp), target_buckets(dataset.target, edges),
                                     perm, K)
    return (in_class + prior) / (total[:, None] + 1.0)


@dataclass
class OrderedTsEncoder:
    """Categorical encoder: ordered statistics on training rows, full
    training-set statistics for anything scored later."""

    seed: int = 0
    n_buckets: int = 10
    prior: float = 0.5
    edges: np.ndarray = field(default_factory=lambda: np.zeros(0))
    classes: Dict[str, List[str]] = field(default_factory=dict)
    counts: Dict[str, np.ndarray] = field(default_factory=dict)
    n_train: int = 0

    def fit_transform(self, dataset: Dataset) -> Dict[str, np.ndarray]:
        self.edges = bucket_edges(dataset.target, self.n_buckets)
        self.n_train = dataset.n_rows
        buckets = target_buckets(dataset.target, self.edges)
        out = {}
        for name in sorted(dataset.categorical):
            labels, codes = np.unique(dataset.categorical[name], return_inverse=True)
            self.classes[name] = [str(x) for x in labels]
            counts = np.zeros((labels.size, self.n_buckets), dtype=np.int64)
            np.add.at(counts, (codes, buckets), 1)
            self.counts[name] = counts
            out[name] = ordered_ts_encode(dataset, name, self.seed, self.n_buckets,
                                          self.prior, self.edges)
        return out

    def transform(self, dataset: Dataset) -> Dict[str, np.ndarray]:
        out = {}
        for name in sorted(self.classes):
            if name not in dataset.categorical:
                raise KeyError(f"categorical column {name!r} missing from data")
            lookup = {c: i for i, c in enumerate(self.classes[name])}
            counts = self.counts[name]
            table = (counts + self.prior) / (counts.sum(axis=1, keepdims=True) + 1.0)
            unseen = np.full(self.n_buckets, self.prior)
            idx = np.array([lookup.get(v, -1) for v in dataset.categorical[name]], dtype=np.intp)
            enc = np.where(idx[:, None] >= 0, table[np.maximum(idx, 0)], unseen[None, :])
            out[name] = enc
        return out

    def to_dict(self):
        return {
            "seed": self.seed,
            "n_buckets": self.n_buckets,
            "prior": self.prior,
            "n_train": self.n_train,
            "edges": [float(x) for x in self.edges],
            "classes": self.classes,
            "counts": {k: v.tolist() for k, v in self.counts.items()},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            seed=d["seed"], n_buckets=d["n_buckets"], prior=d["prior"],
            edges=np.asarray(d["edges"], dtype=np.float64),
            classes={k: list(v) for k, v in d["classes"].items()},
            counts={k: np.asarray(v, dtype=np.int64).reshape(-1, d["n_buckets"])
                    for k, v in d["counts"].items()},
            n_train=d["n_train"],
        )


class FeatureBuilder:
    """Assembles the numeric feature matrix seen by the trees."""

    def __init__(self, numeric_names: Sequence[str], categorical_names: Sequence[str],
                 encoder: OrderedTsEncoder):
        self.numeric_names = list(numeric_names)
        self.categorical_names = sorted(categorical_names)
        self.encoder = encoder

    @property
    def feature_names(self) -> List[str]:
        names = list(self.numeric_names)
        for c in self.categorical_names:
            names += [f"{c}[ts{b}]" for b in range(self.encoder.n_buckets)]
        return names

    @property
    def source_columns(self) -> List[str]:
        """Original column behind each feature."""
        out = list(self.numeric_names)
        for c in self.categorical_names:
            out += [c] * self.encoder.n_buckets
        return out

    def _assemble(self, dataset, encoded):
        blocks = [dataset.numeric[n][:, None] for n in self.numeric_names]
        blocks += [encoded[c] for c in self.categorical_names]
        if not blocks:
            return np.zeros((dataset.n_rows, 0))
        return np.ascontiguousarray(np.hstack(blocks), dtype=np.float64)

    def fit_transform(self, dataset: Dataset) -> np.ndarray:
        return self._assemble(dataset, self.encoder.fit_transform(dataset))

    def transform(self, dataset: Dataset) -> np.ndarray:
        missing = [n for n in self.numeric_names if n not in dataset.numeric]
        if missing:
            raise KeyError(f"numeric columns missing from data: {missing}")
        return self._assemble(dataset, self.encoder.transform(dataset))


# --------------------------------------------------------------------------
# Trees
# --------------------------------------------------------------------------

class PresortedMatrix:
    """Feature matrix plus per-feature ascending sort order, built once and
    shared by every tree of an ensemble."""

    def __init__(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be 2-D")
        self.X = X
        self.xt = np.ascontiguousarray(X.T)
        self.order = np.ascontiguousarray(
            np.argsort(self.xt, axis=1, kind="stable").astype(np.intp))

    @property
    def n_rows(self):
        return self.X.shape[0]


def split_gain(gl, hl, gr, hr, lam):
    """Second-order gain of splitting a node into (left, right)."""
    g, h = gl + gr, hl + hr
    return 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - g * g / (h + lam))


@dataclass
class DecisionTree:
    """Binary tree in flat arrays; ``feature == -1`` marks a leaf.

    Rows with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    n_samples: np.ndarray
    max_depth: int

    @property
    def n_nodes(self):
        return int(self.feature.shape[0])

    @property
    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=np.intp)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.intp)
        for _ in range(self.max_depth + 1):
            f = self.feature[node]
            idx = np.flatnonzero(f >= 0)
            if idx.size == 0:
                break
            cur = node[idx]
            go_left = X[idx, f[idx]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
        return node

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self):
        nodes = [
            [i, int(self.feature[i]), float(self.threshold[i]), int(self.left[i]),
             int(self.right[i]), float(self.value[i]), float(self.gain[i]),
             int(self.n_samples[i])]
            for i in range(self.n_nodes)
        ]
        return {"max_depth": self.max_depth, "nodes": nodes}

    @classmethod
    def from_dict(cls, d):
        nodes = d["nodes"]
        cols = list(zip(*nodes)) if nodes else [[]] * 8
        return cls(
            feature=np.asarray(cols[1], dtype=np.intp),
            threshold=np.asarray(cols[2], dtype=np.float64),
            left=np.asarray(cols[3], dtype=np.intp),
            right=np.asarray(cols[4], dtype=np.intp),
            value=np.asarray(cols[5], dtype=np.float64),
            gain=np.asarray(cols[6], dtype=np.float64),
            n_samples=np.asarray(cols[7], dtype=np.intp),
            max_depth=int(d["max_depth"]),
        )

    @classmethod
    def leaf(cls, value, n_samples=0, max_depth=1):
        return cls(np.array([-1]), np.zeros(1), np.array([-1]), np.array([-1]),
                   np.array([float(value)]), np.zeros(1), np.array([n_samples]), max_depth)


def fit_tree(g, h, data: PresortedMatrix, config: BoostConfig) -> DecisionTree:
    """Grow one tree on gradients ``g`` and Hessians ``h``.

    Hessians are floored at ``config.hessian_floor``.  Among equal-gain
    candidates the lowest feature index, then the lowest threshold, wins;
    gains within ``SPLIT_TIE_RTOL`` across features count as equal.
    A split is only made when its gain is strictly positive.
    """
    g = np.ascontiguousarray(g, dtype=np.float64)
    h = np.ascontiguousarray(np.maximum(h, config.hessian_floor), dtype=np.float64)
    n = data.n_rows
    if g.shape != (n,) or h.shape != (n,):
        raise ValueError("gradient length does not match the data")
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(h))):
        raise FloatingPointError("non-finite gradient or Hessian")
    lam = float(config.l2_lambda)
    if float(h.sum()) + lam <= 0:
        raise FloatingPointError("degenerate tree: all Hessians vanish")

    feature, threshold, left, right, value, gain, count = [], [], [], [], [], [], []

    def new_node():
        for lst, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1),
                       (value, 0.0), (gain, 0.0), (count, 0)):
            lst.append(v)
        return len(feature) - 1

    node_of = np.zeros(n, dtype=np.intp)  # local index within the level
    active = [new_node()]
    for depth in range(config.max_depth + 1):
        m = len(active)
        live = node_of >= 0
        nodes_live = node_of[live]
        node_g = np.bincount(nodes_live, weights=g[live], minlength=m)
        node_h = np.bincount(nodes_live, weights=h[live], minlength=m)
        node_n = np.bincount(nodes_live, minlength=m).astype(np.intp)
        if depth < config.max_depth:
            best_gain, best_feat, best_thr = kernels.scan_level(
                data.xt, data.order, node_of, g, h, node_g, node_h, node_n,
                lam, int(config.min_samples_leaf), SPLIT_TIE_RTOL)
        else:
            best_gain = np.full(m, -np.inf)
            best_feat = np.full(m, -1, dtype=np.intp)
            best_thr = np.zeros(m)

        splitting = {k for k in range(m) if best_feat[k] >= 0 and best_gain[k] > 0}
        remap = np.full(m, -1, dtype=np.intp)
        next_active = []
        if splitting:
            grouped = np.argsort(node_of, kind="stable")
            bounds = np.searchsorted(node_of[grouped], np.arange(m + 1))
        for k in range(m):
            gid = active[k]
            count[gid] = int(node_n[k])
            if k in splitting:
                f, thr = int(best_feat[k]), float(best_thr[k])
                rows = grouped[bounds[k]:bounds[k + 1]]
                goes_left = data.X[rows, f] <= thr
                gl = math.fsum(g[rows[goes_left]])
                hl = math.fsum(h[rows[goes_left]])
                gr = math.fsum(g[rows[~goes_left]])
                hr = math.fsum(h[rows[~goes_left]])
                feature[gid], threshold[gid] = f, thr
                gain[gid] = split_gain(gl, hl, gr, hr, lam)
                li, ri = new_node(), new_node()
                left[gid], right[gid] = li, ri
                remap[k] = len(next_active)
                next_active += [li, ri]
            else:
                value[gid] = -node_g[k] / (node_h[k] + lam)
        if not next_active:
            break
        # rows of split nodes move to remap (left) or remap + 1 (right)
        new_of = np.full(n, -1, dtype=np.intp)
        moving = np.flatnonzero((node_of >= 0) & (remap[np.maximum(node_of, 0)] >= 0))
        base = remap[node_of[moving]]
        parents = np.asarray(active, dtype=np.intp)[node_of[moving]]
        f_rows = np.asarray(feature, dtype=np.intp)[parents]
        t_rows = np.asarray(threshold)[parents]
        new_of[moving] = base + (data.X[moving, f_rows] > t_rows)
        node_of = new_of
        active = next_active

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.intp),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.intp),
        right=np.asarray(right, dtype=np.intp),
        value=np.asarray(value, dtype=np.float64),
        gain=np.asarray(gain, dtype=np.float64),
        n_samples=np.asarray(count, dtype=np.intp),
        max_depth=int(config.max_depth),
    )


def predict_score(trees: Sequence[DecisionTree], learning_rate: float, X) -> np.ndarray:
    """Sum of ``learning_rate * tree(x)``; the exposure offset is not added."""
    X = np.asarray(X, dtype=np.float64)
    out = np.zeros(X.shape[0])
    for tree in trees:
        out += learning_rate * tree.predict(X)
    return out


def feature_importance(trees: Sequence[DecisionTree], feature_names: Sequence[str],
                       group: Optional[Sequence[str]] = None) -> Dict[str, float]:
    """Split gain accumulated per feature, scaled to sum to 100.

    ``group`` optionally maps each feature to a reporting name (e.g. the
    categorical column behind several encoded features).
    """
    if not trees:
        raise ValueError("feature importance needs a non-empty ensemble")
    names = list(group) if group is not None else list(feature_names)
    totals = dict.fromkeys(names, 0.0)
    for tree in trees:
        for f, gval in zip(tree.feature, tree.gain):
            if f >= 0:
                totals[names[f]] += float(gval)
    grand = math.fsum(totals.values())
    if grand <= 0:
        warnings.warn("ensemble has no splits; all importances are zero", RuntimeWarning)
        return {k: 0.0 for k in totals}
    return {k: 100.0 * v / grand for k, v in totals.items()}

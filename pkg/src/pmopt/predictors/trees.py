"""Regression trees and bootstrap forests.

Trees grow on the unit box (features are expected in [0, 1]) by exhaustive
split search: candidate thresholds are midpoints of consecutive distinct
sorted feature values and the chosen split minimizes the summed within-child
squared error. The routing predicate is ``x[f] <= threshold`` goes left, so a
point exactly at a threshold routes left; leaf boxes share their boundary.
Each leaf stores its box (per-feature [lb, ub] intersection of the split
half-spaces on the root path) for the optimization encoders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..errors import DimensionMismatch
from .data import Dataset


@dataclass
class RegressionTree:
    n_features: int
    feature: np.ndarray        # split feature per node, -1 for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray          # leaf prediction, NaN on internal nodes
    leaf_nodes: np.ndarray     # node ids of the leaves
    leaf_lo: np.ndarray        # (L, n) leaf boxes
    leaf_hi: np.ndarray
    leaf_value: np.ndarray     # (L,)
    _leaf_pos: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._leaf_pos:
            self._leaf_pos = {int(nid): k for k, nid in enumerate(self.leaf_nodes)}

    @property
    def n_leaves(self) -> int:
        return self.leaf_nodes.shape[0]

    def depth(self) -> int:
        def walk(node, d):
            if self.feature[node] < 0:
                return d
            return max(walk(self.left[node], d + 1), walk(self.right[node], d + 1))
        return walk(0, 0)

    def leaf_index(self, X) -> np.ndarray:
        """Position (0..L-1) of the leaf each row routes to."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"expected {self.n_features} features, got {X.shape[1]}")
        nodes = kernels.route_leaf_ids(self.feature, self.threshold,
                                       self.left, self.right, X)
        return np.array([self._leaf_pos[int(v)] for v in nodes], dtype=np.int64)

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        vals = self.leaf_value[self.leaf_index(X)]
        return float(vals[0]) if single else vals


@dataclass
class RandomForest:
    trees: list

    def __post_init__(self):
        if not self.trees:
            raise DimensionMismatch("forest needs at least one tree")
        n = self.trees[0].n_features
        if any(t.n_features != n for t in self.trees):
            raise DimensionMismatch("trees disagree on feature count")

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        Xb = np.atleast_2d(X)
        acc = np.zeros(Xb.shape[0])
        for t in self.trees:
            acc += t.predict(Xb)
        acc /= self.n_trees
        return float(acc[0]) if single else acc


def _best_split(X, y, idx, feats, min_leaf):
    """Exhaustive midpoint search; returns (feature, threshold) or None."""
    m = idx.shape[0]
    best = None
    best_sse = np.inf
    for f in feats:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs_s = xs[order]
        ys_s = y[idx][order]
        c1 = np.cumsum(ys_s)
        c2 = np.cumsum(ys_s * ys_s)
        tot1, tot2 = c1[-1], c2[-1]
        ks = np.arange(min_leaf, m - min_leaf + 1)
        if ks.size == 0:
            continue
        distinct = xs_s[ks - 1] < xs_s[ks]
        ks = ks[distinct]
        if ks.size == 0:
            continue
        l1 = c1[ks - 1]
        l2 = c2[ks - 1]
        sse = (l2 - l1 * l1 / ks) + ((tot2 - l2) - (tot1 - l1) ** 2 / (m - ks))
        k_best = int(np.argmin(sse))
        if sse[k_best] < best_sse - 1e-15:
            best_sse = sse[k_best]
            k = int(ks[k_best])
            best = (int(f), 0.5 * (xs_s[k - 1] + xs_s[k]))
    return best


def fit_tree(train: Dataset, max_depth: int, min_leaf: int = 1,
             feat_subset: int | None = None,
             rng: np.random.Generator | None = None,
             domain_lo: float = 0.0, domain_hi: float = 1.0) -> RegressionTree:
    """Grow a tree by variance-reduction splits; leaves store boxes rooted
    at the unit box (or the supplied domain)."""
    if max_depth < 1 or min_leaf < 1:
        raise ValueError("max_depth and min_leaf must be >= 1")
    X, y = train.X, train.y
    n = train.n
    if feat_subset is None or feat_subset >= n:
        feat_subset = n

    feature, threshold, left, right, value = [], [], [], [], []
    leaf_nodes, leaf_lo, leaf_hi, leaf_value = [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(np.nan)
        return len(feature) - 1

    root_lo = np.full(n, float(domain_lo))
    root_hi = np.full(n, float(domain_hi))
    stack = [(new_node(), np.arange(X.shape[0]), root_lo, root_hi, 0)]
    while stack:
        node, idx, blo, bhi, depth = stack.pop()
        ys = y[idx]
        split = None
        if depth < max_depth and idx.shape[0] >= 2 * min_leaf and np.ptp(ys) > 0:
            if feat_subset < n:
                feats = np.sort(rng.choice(n, size=feat_subset, replace=False))
            else:
                feats = np.arange(n)
            split = _best_split(X, y, idx, feats, min_leaf)
        if split is None:
            value[node] = float(ys.mean())
            leaf_nodes.append(node)
            leaf_lo.append(blo)
            leaf_hi.append(bhi)
            leaf_value.append(value[node])
            continue
        f, thr = split
        feature[node] = f
        threshold[node] = thr
        go_left = X[idx, f] <= thr
        lnode, rnode = new_node(), new_node()
        left[node], right[node] = lnode, rnode
        llo, lhi = blo.copy(), bhi.copy()
        lhi[f] = thr
        rlo, rhi = blo.copy(), bhi.copy()
        rlo[f] = thr
        # push right first so the left child is processed first (stable ids)
        stack.append((rnode, idx[~go_left], rlo, rhi, depth + 1))
        stack.append((lnode, idx[go_left], llo, lhi, depth + 1))

    order = np.argsort(leaf_nodes, kind="stable")
    return RegressionTree(
        n_features=n,
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=float),
        leaf_nodes=np.asarray(leaf_nodes, dtype=np.int64)[order],
        leaf_lo=np.asarray(leaf_lo, dtype=float)[order],
        leaf_hi=np.asarray(leaf_hi, dtype=float)[order],
        leaf_value=np.asarray(leaf_value, dtype=float)[order],
    )


def fit_forest(train: Dataset, n_trees: int, max_depth: int,
               rng: np.random.Generator, min_leaf: int = 1,
               feat_subset: int | None = None) -> RandomForest:
    """Bag of trees, each fit on a bootstrap resample of the training rows."""
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    trees = []
    for _ in range(n_trees):
        idx = rng.integers(0, train.q, size=train.q)
        boot = Dataset(train.X[idx], train.y[idx])
        trees.append(fit_tree(boot, max_depth, min_leaf=min_leaf,
                              feat_subset=feat_subset, rng=rng))
    return RandomForest(trees)

"""Independent oracles used to cross-check encoders and the solver."""

from __future__ import annotations

import numpy as np

from ..errors import TooManyTuples, ZeroGradient
from ..predictors import NeuralNet, RandomForest


def analytic_md_lr(coef, mu, cov, gamma: float, sense: str = "min"):
    """Closed-form optimizer of a linear objective over a covariance
    ellipsoid: mu -+ gamma * C b / sqrt(b' C b) (minus for minimization)."""
    b = np.asarray(coef, dtype=float)
    mu = np.asarray(mu, dtype=float)
    C = np.asarray(cov, dtype=float)
    if np.all(b == 0.0):
        raise ZeroGradient("objective gradient is zero")
    scale = float(np.sqrt(b @ C @ b))
    step = gamma * (C @ b) / scale
    return mu - step if sense == "min" else mu + step


def brute_force_forest(forest: RandomForest, sense: str = "min",
                       lo=0.0, hi=1.0, eps: float = 1e-4,
                       max_tuples: int = 100_000):
    """Enumerate one-leaf-per-tree tuples with a nonempty box intersection
    (width >= eps per feature inside the [lo, hi] box) and return
    (best objective, leaf tuple). The objective accumulates leaf values in
    tree order and divides once, matching the solver's decode step exactly.
    """
    n = forest.n_features
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy()
    total = 1
    for t in forest.trees:
        total *= t.n_leaves
        if total > max_tuples:
            raise TooManyTuples(f"{total} tuples exceed budget {max_tuples}")

    T = forest.n_trees
    best_obj = np.inf if sense == "min" else -np.inf
    best_tuple = None
    choice = [0] * T

    def recurse(t, box_lo, box_hi, acc):
        nonlocal best_obj, best_tuple
        if t == T:
            obj = acc / T
            if (sense == "min" and obj < best_obj) or \
               (sense == "max" and obj > best_obj):
                best_obj = obj
                best_tuple = tuple(choice)
            return
        tree = forest.trees[t]
        for l in range(tree.n_leaves):
            nlo = np.maximum(box_lo, tree.leaf_lo[l])
            nhi = np.minimum(box_hi, tree.leaf_hi[l])
            if np.all(nlo <= nhi - eps):
                choice[t] = l
                recurse(t + 1, nlo, nhi, acc + tree.leaf_value[l])

    recurse(0, lo, hi, 0.0)
    if best_tuple is None:
        return None, None
    return float(best_obj), best_tuple


def grid_oracle_nn(nn: NeuralNet, lo=0.0, hi=1.0, h: float = 0.01,
                   sense: str = "min"):
    """Exhaustive evaluation on an h-grid over the box (n <= 3)."""
    n = nn.n_features
    if n > 3:
        raise ValueError("grid oracle is only tractable for n <= 3")
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,))
    axes = [np.arange(lo[i], hi[i] + h / 2, h) for i in range(n)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    vals = nn.predict(pts)
    k = int(np.argmin(vals)) if sense == "min" else int(np.argmax(vals))
    return float(vals[k]), pts[k]


def nn_lipschitz_l1(nn: NeuralNet) -> float:
    """Upper bound on |F(x) - F(y)| / ||x - y||_1 from layer weight norms."""
    M = np.abs(nn.weights[-1][0])
    for W, _ in reversed(nn.weights[:-1]):
        M = np.abs(W) @ M
    return float(M.max())

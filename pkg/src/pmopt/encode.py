"""Compile trained predictors and relevance constraints into optimization
models.

Three predictor families map to three model shapes: a linear model is a
plain LP over the feature box; a forest picks one leaf per tree with
binaries and intersects the chosen leaf boxes into a nonempty region whose
midpoint is the decision vector; a rectifier network unrolls layer by layer
with one indicator binary per hidden neuron and interval-propagated
activation bounds.

Relevance constraints attach to the registered decision variables: either a
single covariance ellipsoid (quadratic row) or the nearest-neighbor
formulation that bounds the mean L1 distance to the K closest reference
points with indicator binaries and per-point big-M rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc

from .errors import (DimensionMismatch, EmptyForest, KOutOfRange,
                     MissingXVars, UnboundedNeuron)
from .linalg import spd_inverse
from .model import BINARY, CONTINUOUS, ModelIR, QuadConstraint
from .predictors import (Dataset, LinearModel, NeuralNet, RandomForest,
                         family_of)

BOX_EPS = 1e-4          # minimum width of the intersected leaf region
ALPHA_LEVELS = (0.05, 0.01, 0.001)


# -- relevance specification ---------------------------------------------------

@dataclass(frozen=True)
class Relevance:
    """Which training-relevance constraint, if any, a problem carries."""

    variant: str                      # none | mahalanobis | knn
    alpha: float | None = None
    gamma: float | None = None
    k: int = 1
    reference: np.ndarray | None = None
    mu: np.ndarray | None = None
    cov: np.ndarray | None = None

    @staticmethod
    def none() -> "Relevance":
        return Relevance("none")

    @staticmethod
    def mahalanobis(data: Dataset | None = None, *, alpha: float | None = 0.05,
                    gamma: float | None = None,
                    mu=None, cov=None) -> "Relevance":
        if data is not None:
            mu = data.X.mean(axis=0)
            cov = np.cov(data.X, rowvar=False, ddof=1)
        if mu is None or cov is None:
            raise ValueError("mahalanobis needs a dataset or explicit mu/cov")
        if gamma is None:
            if alpha not in ALPHA_LEVELS:
                raise ValueError(f"alpha must be one of {ALPHA_LEVELS}")
        elif gamma <= 0:
            raise ValueError("gamma must be positive")
        return Relevance("mahalanobis", alpha=alpha, gamma=gamma,
                         mu=np.asarray(mu, dtype=float),
                         cov=np.asarray(cov, dtype=float))

    @staticmethod
    def knn(reference, k: int, gamma: float) -> "Relevance":
        ref = np.asarray(reference, dtype=float)
        if ref.ndim != 2:
            raise DimensionMismatch("reference set must be a 2-D matrix")
        if not 1 <= k <= ref.shape[0]:
            raise KOutOfRange(f"K={k} outside 1..{ref.shape[0]}")
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        return Relevance("knn", k=int(k), gamma=float(gamma), reference=ref)


@dataclass
class PmoProblem:
    """A trained predictor plus the feasible region to optimize it over."""

    predictor: object
    sense: str = "min"                       # min | max
    lo: np.ndarray | float = 0.0
    hi: np.ndarray | float = 1.0
    lin_A: np.ndarray | None = None          # optional rows A x <= b
    lin_b: np.ndarray | None = None
    relevance: Relevance = field(default_factory=Relevance.none)

    def box(self, n: int):
        lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (n,)).copy()
        hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (n,)).copy()
        return lo, hi


# -- gamma from the chi-square quantile ----------------------------------------

def chi2_cdf(t: float, n: int) -> float:
    """Chi-square CDF with n degrees of freedom via the regularized lower
    incomplete gamma function."""
    return float(gammainc(n / 2.0, t / 2.0))


def gamma_from_alpha(n: int, alpha: float) -> float:
    """Square root of the chi-square quantile at probability 1 - alpha,
    inverted by bisection to 1e-10."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    target = 1.0 - alpha
    lo, hi = 0.0, float(max(4 * n, 16))
    while chi2_cdf(hi, n) < target:
        hi *= 2.0
    while hi - lo > 1e-10 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, n) < target:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(0.5 * (lo + hi)))


# -- family encoders -----------------------------------------------------------

def encode_linear(p: LinearModel, prob: PmoProblem) -> ModelIR:
    n = p.n_features
    lo, hi = prob.box(n)
    m = ModelIR("linear_pmo")
    x_ids = [m.add_variable(CONTINUOUS, lo[i], hi[i], f"x{i}") for i in range(n)]
    m.set_x_vars(x_ids)
    m.set_objective(prob.sense,
                    [(x_ids[i], float(p.coef[i])) for i in range(n)],
                    float(p.intercept))
    return m


def encode_forest(f: RandomForest, prob: PmoProblem,
                  eps: float = BOX_EPS) -> ModelIR:
    """One-leaf-per-tree selection with box-intersection consistency.

    Binary p[t,l] picks leaf l of tree t; per feature, region variables
    zlb/zub must lie inside every chosen leaf's box and keep width >= eps;
    the decision vector is the region midpoint, so relevance constraints can
    attach to it.
    """
    if not isinstance(f, RandomForest) or f.n_trees < 1:
        raise EmptyForest("need a forest with at least one tree")
    n = f.n_features
    lo, hi = prob.box(n)
    m = ModelIR("forest_pmo")
    x_ids = [m.add_variable(CONTINUOUS, lo[i], hi[i], f"x{i}") for i in range(n)]
    m.set_x_vars(x_ids)
    zlb = [m.add_variable(CONTINUOUS, lo[i], hi[i], f"zlb{i}") for i in range(n)]
    zub = [m.add_variable(CONTINUOUS, lo[i], hi[i], f"zub{i}") for i in range(n)]

    obj_terms = []
    tree_meta = []
    T = f.n_trees
    for t, tree in enumerate(f.trees):
        pids = [m.add_variable(BINARY, 0.0, 1.0, f"p_t{t}_l{l}")
                for l in range(tree.n_leaves)]
        tree_meta.append(list(zip(pids, tree.leaf_value.tolist())))
        m.add_linear([(pid, 1.0) for pid in pids], "=", 1.0, f"one_leaf_t{t}")
        for i in range(n):
            m.add_linear([(pids[l], float(tree.leaf_lo[l, i]))
                          for l in range(tree.n_leaves)] + [(zlb[i], -1.0)],
                         "<=", 0.0, f"lb_t{t}_f{i}")
            m.add_linear([(pids[l], float(tree.leaf_hi[l, i]))
                          for l in range(tree.n_leaves)] + [(zub[i], -1.0)],
                         ">=", 0.0, f"ub_t{t}_f{i}")
        obj_terms.extend((pid, v / T) for pid, v in tree_meta[-1])
    for i in range(n):
        m.add_linear([(zlb[i], 1.0), (zub[i], -1.0)], "<=", -eps,
                     f"width_f{i}")
        m.add_linear([(x_ids[i], 1.0), (zlb[i], -0.5), (zub[i], -0.5)],
                     "=", 0.0, f"mid_f{i}")
    m.set_objective(prob.sense, obj_terms, 0.0)
    m.meta["forest"] = {"trees": tree_meta, "zlb": zlb, "zub": zub, "eps": eps}
    return m


def encode_neural_net(nn: NeuralNet, prob: PmoProblem) -> ModelIR:
    """Big-M rectifier encoding with interval-propagated activation bounds.

    Per hidden neuron with pre-activation a = w @ h_prev + b and bounds
    [a_lo, a_hi] from the box: continuous h >= 0, binary s, rows
    h >= a, h <= a - a_lo (1 - s), h <= max(a_hi, 0) s. Neurons whose
    bounds pin the rectifier state keep their binary but with fixed bounds.
    """
    n = nn.n_features
    lo, hi = prob.box(n)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise UnboundedNeuron("need finite feature bounds for big-M rows")
    m = ModelIR("nn_pmo")
    x_ids = [m.add_variable(CONTINUOUS, lo[i], hi[i], f"x{i}") for i in range(n)]
    m.set_x_vars(x_ids)

    prev_ids = x_ids
    prev_lo, prev_hi = lo.copy(), hi.copy()
    h_meta, s_meta = [], []
    for layer, (W, b) in enumerate(nn.weights[:-1]):
        fan_in, width = W.shape
        a_lo = b + np.minimum(W * prev_lo[:, None], W * prev_hi[:, None]).sum(axis=0)
        a_hi = b + np.maximum(W * prev_lo[:, None], W * prev_hi[:, None]).sum(axis=0)
        if not (np.all(np.isfinite(a_lo)) and np.all(np.isfinite(a_hi))):
            raise UnboundedNeuron(f"layer {layer} propagated non-finite bounds")
        h_ids, s_ids = [], []
        for j in range(width):
            hcap = max(float(a_hi[j]), 0.0)
            hid = m.add_variable(CONTINUOUS, 0.0, hcap, f"h_{layer}_{j}")
            if a_lo[j] >= 0.0:
                s_b = (1.0, 1.0)          # rectifier provably active
            elif a_hi[j] <= 0.0:
                s_b = (0.0, 0.0)          # provably inactive
            else:
                s_b = (0.0, 1.0)
            sid = m.add_variable(BINARY, s_b[0], s_b[1], f"s_{layer}_{j}")
            wterms = [(prev_ids[i], -float(W[i, j])) for i in range(fan_in)
                      if W[i, j] != 0.0]
            m.add_linear([(hid, 1.0)] + wterms, ">=", float(b[j]),
                         f"act_lo_{layer}_{j}")
            m.add_linear([(hid, 1.0)] + wterms + [(sid, -float(a_lo[j]))],
                         "<=", float(b[j] - a_lo[j]), f"act_hi_{layer}_{j}")
            m.add_linear([(hid, 1.0), (sid, -hcap)], "<=", 0.0,
                         f"act_cap_{layer}_{j}")
            h_ids.append(hid)
            s_ids.append(sid)
        h_meta.append(h_ids)
        s_meta.append(s_ids)
        prev_ids = h_ids
        prev_lo = np.maximum(a_lo, 0.0)
        prev_hi = np.maximum(a_hi, 0.0)

    W_out, b_out = nn.weights[-1]
    m.set_objective(prob.sense,
                    [(prev_ids[i], float(W_out[i, 0]))
                     for i in range(W_out.shape[0]) if W_out[i, 0] != 0.0],
                    float(b_out[0]))
    m.meta["nn"] = {"h_ids": h_meta, "s_ids": s_meta}
    return m


# -- relevance attachments ------------------------------------------------------

def attach_mahalanobis(m: ModelIR, mu, cinv, gamma: float) -> ModelIR:
    """Append the single covariance-ellipsoid row on the decision vector."""
    if not m.x_ids:
        raise MissingXVars("model has no registered decision variables")
    mu = np.asarray(mu, dtype=float)
    cinv = np.asarray(cinv, dtype=float)
    if mu.shape[0] != len(m.x_ids) or cinv.shape != (mu.shape[0], mu.shape[0]):
        raise DimensionMismatch("mu/cinv do not match the decision vector")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    m.add_quadratic(QuadConstraint.from_ellipsoid(m.x_ids, mu, cinv, gamma))
    return m


def attach_knn(m: ModelIR, reference, K: int, gamma: float) -> ModelIR:
    """Append the mean-distance-to-K-nearest-reference-points constraint.

    Deviation variables split x - ref per coordinate, w accumulates the L1
    distance per reference point, binaries select which points count as the
    k nearest, and order-statistic variables z bound the selected
    distances. Big-M per reference point is the largest L1 distance the box
    allows to that point.
    """
    if not m.x_ids:
        raise MissingXVars("model has no registered decision variables")
    ref = np.asarray(reference, dtype=float)
    q, n = ref.shape
    if n != len(m.x_ids):
        raise DimensionMismatch("reference set feature count mismatch")
    if not 1 <= K <= q:
        raise KOutOfRange(f"K={K} outside 1..{q}")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    lo = np.array([m.variables[v].lower for v in m.x_ids])
    hi = np.array([m.variables[v].upper for v in m.x_ids])
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise DimensionMismatch("knn rows need a finite feature box")
    span = hi - lo
    bigm = np.maximum(ref - lo[None, :], hi[None, :] - ref).sum(axis=1)

    dp = [[m.add_variable(CONTINUOUS, 0.0, float(span[i]), f"dp_{i}_{j}")
           for j in range(q)] for i in range(n)]
    dm = [[m.add_variable(CONTINUOUS, 0.0, float(span[i]), f"dm_{i}_{j}")
           for j in range(q)] for i in range(n)]
    w = [m.add_variable(CONTINUOUS, 0.0, float(span.sum()), f"w_{j}")
         for j in range(q)]
    pi = [[m.add_variable(BINARY, 0.0, 1.0, f"pi_{k}_{j}") for j in range(q)]
          for k in range(K)]
    z = [m.add_variable(CONTINUOUS, 0.0, float(span.sum()), f"z_{k}")
         for k in range(K)]

    for j in range(q):
        for i in range(n):
            m.add_linear([(m.x_ids[i], 1.0), (dp[i][j], 1.0), (dm[i][j], -1.0)],
                         "=", float(ref[j, i]), f"dev_{i}_{j}")
        m.add_linear([(w[j], 1.0)] + [(dp[i][j], -1.0) for i in range(n)]
                     + [(dm[i][j], -1.0) for i in range(n)],
                     "=", 0.0, f"dist_{j}")
    for k in range(K):
        for j in range(q):
            m.add_linear([(z[k], 1.0), (w[j], -1.0), (pi[k][j], -float(bigm[j]))],
                         ">=", -float(bigm[j]), f"order_{k}_{j}")
        m.add_linear([(pi[k][j], 1.0) for j in range(q)], "=", float(k + 1),
                     f"select_{k}")
    m.add_linear([(zk, 1.0 / K) for zk in z], "<=", float(gamma), "mean_dist")

    m.meta["knn"] = {
        "ref": ref, "K": int(K), "gamma": float(gamma),
        "dp_ids": np.asarray(dp, dtype=np.int64),
        "dm_ids": np.asarray(dm, dtype=np.int64),
        "w_ids": np.asarray(w, dtype=np.int64),
        "pi_ids": np.asarray(pi, dtype=np.int64),
        "z_ids": np.asarray(z, dtype=np.int64),
        "bigm": bigm,
    }
    return m


def suggest_knn_gamma(reference, K: int, quantile: float = 0.5) -> float:
    """A feasible-by-construction gamma: the given quantile of the in-sample
    mean distance to the K nearest other reference points."""
    ref = np.asarray(reference, dtype=float)
    q = ref.shape[0]
    if not 1 <= K <= q - 1:
        raise KOutOfRange(f"K={K} outside 1..{q - 1}")
    dists = np.abs(ref[:, None, :] - ref[None, :, :]).sum(axis=2)
    np.fill_diagonal(dists, np.inf)
    dists.sort(axis=1)
    means = dists[:, :K].mean(axis=1)
    return float(np.quantile(means, quantile))


# -- problem assembly -----------------------------------------------------------

def build(prob: PmoProblem) -> ModelIR:
    """Dispatch to the family encoder, add the optional linear rows, and
    attach the relevance variant."""
    fam = family_of(prob.predictor)
    if fam == "linear":
        m = encode_linear(prob.predictor, prob)
    elif fam == "forest":
        m = encode_forest(prob.predictor, prob)
    else:
        m = encode_neural_net(prob.predictor, prob)

    if prob.lin_A is not None:
        A = np.atleast_2d(np.asarray(prob.lin_A, dtype=float))
        bvec = np.atleast_1d(np.asarray(prob.lin_b, dtype=float))
        if A.shape[0] != bvec.shape[0] or A.shape[1] != len(m.x_ids):
            raise DimensionMismatch("linear constraint shape mismatch")
        for r in range(A.shape[0]):
            m.add_linear([(m.x_ids[i], float(A[r, i]))
                          for i in range(A.shape[1]) if A[r, i] != 0.0],
                         "<=", float(bvec[r]), f"lin_{r}")

    rel = prob.relevance
    if rel.variant == "mahalanobis":
        gamma = rel.gamma
        if gamma is None:
            gamma = gamma_from_alpha(len(m.x_ids), rel.alpha)
        attach_mahalanobis(m, rel.mu, spd_inverse(rel.cov), gamma)
        m.meta["mahalanobis"] = {"mu": rel.mu, "cov": rel.cov, "gamma": gamma}
    elif rel.variant == "knn":
        attach_knn(m, rel.reference, rel.k, rel.gamma)
    m.validate()
    return m

"""Branch-and-bound over binaries with an outer-approximation cut loop for
the single convex quadratic row.

Node selection is best-bound (min-heap on parent LP bound); branching picks
the most fractional binary (value closest to 0.5), ties broken by lowest
variable id; children are pushed so the child agreeing with the rounded
branching value is explored first among equal bounds, which produces a
depth-first dive. Every node LP is solved from scratch by the two-phase
simplex (no warm starts).

The quadratic row (x - mu)^T cinv (x - mu) <= gamma^2 is enforced at the
master level: solve the mixed-integer model over the accumulated cuts, check
the returned point, add a supporting hyperplane, re-solve. Cuts are tangent
planes of the ellipsoid at the boundary point radially below the violating
master optimum (same normal as the plain gradient cut at the violating
point, strictly tighter right-hand side). The loop is seeded with the 2n
axis-aligned tangent planes so even box-free models have a bounded master.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from .. import linalg
from ..errors import NumericalBreakdown
from ..model import MAX, ModelIR
from .simplex import ArrayLP, LpResult, refine_result, solve_arrays

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
LIMIT = "LimitReached"

_SENSE_CODE = {"<=": -1, "=": 0, ">=": 1}


@dataclass
class SolverConfig:
    feas_tol: float = 1e-6
    int_tol: float = 1e-5
    rel_gap: float = 1e-6
    oa_tol: float = 1e-6          # allowed violation of the squared distance
    node_limit: int = 200_000
    time_limit: float | None = None
    max_cuts: int = 200
    bland_after: int = 1000
    lp_dj_tol: float = 1e-9       # simplex pricing tolerance
    lp_tie_tol: float = 1e-9      # simplex ratio-tie tolerance
    node_log: object = None       # file-like; one line per processed node

    def __post_init__(self):
        for nm in ("feas_tol", "int_tol", "rel_gap", "oa_tol"):
            if getattr(self, nm) <= 0:
                raise ValueError(f"{nm} must be positive")


@dataclass
class Solution:
    status: str
    x: np.ndarray | None          # all model variables
    objective: float | None
    best_bound: float | None
    stats: dict = field(default_factory=dict)
    aux: dict = field(default_factory=dict)
    x_decision: np.ndarray | None = None   # registered decision vector


@dataclass
class CompiledModel:
    n: int
    lo: np.ndarray
    hi: np.ndarray
    binaries: np.ndarray
    A: np.ndarray
    sense: np.ndarray
    b: np.ndarray
    c: np.ndarray          # minimize form
    c0: float
    negate: bool           # True when the source objective was max
    quad: tuple | None     # (x_ids, mu, cinv, gamma)
    model: ModelIR


def compile_model(model: ModelIR) -> CompiledModel:
    model.validate()
    n = model.num_vars
    lo = np.array([v.lower for v in model.variables])
    hi = np.array([v.upper for v in model.variables])
    m = len(model.linear)
    A = np.zeros((m, n))
    sense = np.zeros(m, dtype=np.int8)
    b = np.zeros(m)
    for i, con in enumerate(model.linear):
        for vid, coef in con.terms:
            A[i, vid] = coef
        sense[i] = _SENSE_CODE[con.sense]
        b[i] = con.rhs
    c = np.zeros(n)
    for vid, coef in model.obj_terms:
        c[vid] = coef
    c0 = model.obj_constant
    negate = model.obj_sense == MAX
    if negate:
        c = -c
        c0 = -c0
    quad = model.quadratic.ellipsoid if model.quadratic is not None else None
    return CompiledModel(n, lo, hi, np.asarray(model.binaries(), dtype=np.int64),
                         A, sense, b, c, c0, negate, quad, model)


def _node_lp(cm: CompiledModel, cut_A, cut_b, lo, hi, cfg: SolverConfig,
             refine=False) -> LpResult:
    if cut_A is not None and len(cut_A):
        A = np.vstack([cm.A, np.asarray(cut_A)])
        sense = np.concatenate([cm.sense, np.full(len(cut_A), -1, dtype=np.int8)])
        b = np.concatenate([cm.b, np.asarray(cut_b)])
    else:
        A, sense, b = cm.A, cm.sense, cm.b
    pr = ArrayLP(A, sense, b, cm.c, cm.c0, lo, hi)
    res = solve_arrays(pr, bland_after=cfg.bland_after, refine=refine,
                       dj_tol=cfg.lp_dj_tol, tie_tol=cfg.lp_tie_tol)
    res.problem = pr
    return res


def _branch_and_bound(cm: CompiledModel, cut_A, cut_b, cfg: SolverConfig,
                      stats: dict, deadline: float | None,
                      base_lo=None, base_hi=None):
    """Minimize over the compiled model plus cut rows. Returns
    (status, x, obj, bound)."""
    base_lo = cm.lo.copy() if base_lo is None else base_lo.copy()
    base_hi = cm.hi.copy() if base_hi is None else base_hi.copy()
    if cm.binaries.size == 0:
        res = _node_lp(cm, cut_A, cut_b, base_lo, base_hi, cfg, refine=True)
        stats["simplex_iters"] += res.iters
        stats["nodes"] += 1
        if res.status == "optimal":
            return OPTIMAL, res.x, res.obj, res.obj
        return (INFEASIBLE if res.status == "infeasible" else UNBOUNDED,
                None, None, None)

    # key: (bound, -depth, seq) -- best bound first, then deepest (dive),
    # then insertion order so the rounded-toward child pops first
    heap = []
    seq = 0
    heapq.heappush(heap, (-np.inf, 0, seq, {}))
    inc_obj = np.inf
    inc_x = None
    gbound = -np.inf
    node_id = 0
    int_ids = cm.binaries

    while heap:
        key, negdepth, _, fixes = heapq.heappop(heap)
        if key > gbound:
            gbound = key
        eps = cfg.rel_gap * max(1.0, abs(inc_obj)) if np.isfinite(inc_obj) else 0.0
        if np.isfinite(inc_obj) and key >= inc_obj - eps:
            break   # best-bound order: everything left is at least as bad
        if node_id >= cfg.node_limit or (deadline and time.monotonic() > deadline):
            status = LIMIT
            bound = gbound if np.isfinite(gbound) else None
            return (status, inc_x, inc_obj if inc_x is not None else None, bound)

        lo = base_lo.copy()
        hi = base_hi.copy()
        for vid, (l, h) in fixes.items():
            lo[vid] = l
            hi[vid] = h
        res = _node_lp(cm, cut_A, cut_b, lo, hi, cfg)
        stats["simplex_iters"] += res.iters
        node_id += 1
        stats["nodes"] += 1

        if res.status == "unbounded":
            # box-bounded problems never hit this; report and stop
            if node_id == 1:
                return UNBOUNDED, None, None, None
            res.status = "infeasible"
        if res.status == "infeasible":
            _log_node(cfg, node_id, len(fixes), gbound, inc_obj)
            continue
        bound = max(res.obj, key) if np.isfinite(key) else res.obj
        if bound > gbound and node_id == 1:
            gbound = bound
        _log_node(cfg, node_id, len(fixes), gbound, inc_obj)
        if np.isfinite(inc_obj) and bound >= inc_obj - eps:
            continue

        xv = res.x
        fracs = np.abs(xv[int_ids] - np.round(xv[int_ids]))
        if fracs.size == 0 or fracs.max() <= cfg.int_tol:
            cand_obj, cand_x = _clean_incumbent(
                cm, cut_A, cut_b, lo, hi, xv, int_ids, cfg, stats)
            if cand_obj is not None and cand_obj < inc_obj - 1e-12:
                inc_obj = cand_obj
                inc_x = cand_x
            continue

        # most fractional binary: value closest to one half, lowest id on ties
        dist = np.abs(xv[int_ids] - 0.5)
        j = int(int_ids[int(np.argmin(dist))])
        toward = 1.0 if xv[j] >= 0.5 else 0.0
        for val in (toward, 1.0 - toward):
            child = dict(fixes)
            child[j] = (val, val)
            seq += 1
            heapq.heappush(heap, (bound, negdepth - 1, seq, child))

    if inc_x is None:
        return INFEASIBLE, None, None, None
    if not heap:
        gbound = inc_obj
    else:
        gbound = min(gbound, inc_obj)
    return OPTIMAL, inc_x, inc_obj, gbound


def _clean_incumbent(cm, cut_A, cut_b, lo, hi, xv, int_ids, cfg, stats):
    """Re-solve with binaries pinned at their rounded values for an exact
    vertex; returns (obj, x) or (None, None) if the rounding is infeasible
    (possible right at the integrality tolerance)."""
    rounded = np.round(xv[int_ids])
    lo2, hi2 = lo.copy(), hi.copy()
    lo2[int_ids] = rounded
    hi2[int_ids] = rounded
    res = _node_lp(cm, cut_A, cut_b, lo2, hi2, cfg, refine=True)
    stats["simplex_iters"] += res.iters
    if res.status != "optimal":
        return None, None
    return res.obj, res.x


def _log_node(cfg, node_id, depth, bound, inc):
    if cfg.node_log is None:
        return
    inc_s = f"{inc:.12g}" if np.isfinite(inc) else "-"
    b_s = f"{bound:.12g}" if np.isfinite(bound) else "-inf"
    cfg.node_log.write(f"{node_id} {depth} {b_s} {inc_s}\n")


def _try_interior_accept(cm: CompiledModel, cut_A, cut_b, cfg, stats,
                         deadline, xv, obj, bound):
    """Re-solve with the decision vector confined to a small box strictly
    inside the ellipsoid, centered at the inward radial projection of the
    violating master optimum. Accept the result when it proves the current
    bound within the relative gap; any accepted point satisfies the
    quadratic row with margin."""
    x_ids, mu, cinv, gamma = cm.quad
    ids = np.asarray(x_ids, dtype=np.int64)
    margin = 0.02
    gnorm = np.sqrt(linalg.quadratic_form(xv, mu, cinv))
    center = mu + ((1.0 - margin) * gamma / max(gnorm, 1e-30)) * (xv - mu)
    lam_ub = np.sqrt(float(np.trace(cinv)))
    r = margin * gamma / (lam_ub * np.sqrt(len(x_ids))) if lam_ub > 0 else 0.0
    lo_fix = cm.lo.copy()
    hi_fix = cm.hi.copy()
    lo_fix[ids] = np.maximum(cm.lo[ids], center - r)
    hi_fix[ids] = np.minimum(cm.hi[ids], center + r)
    if np.any(lo_fix[ids] > hi_fix[ids]):
        return None
    st2, x2, obj2, _ = _branch_and_bound(
        cm, cut_A, cut_b, cfg, stats, deadline, lo_fix, hi_fix)
    if st2 == OPTIMAL and obj2 <= obj + cfg.rel_gap * (1.0 + abs(obj)):
        return x2, obj2
    return None


def _seed_cuts(cm: CompiledModel):
    """Axis-aligned tangent planes of the ellipsoid: one supporting
    hyperplane at each coordinate extreme. Bounds the master even when the
    decision variables carry no box."""
    x_ids, mu, cinv, gamma = cm.quad
    cov = linalg.spd_inverse(cinv)
    rows, rhs = [], []
    for i, vid in enumerate(x_ids):
        s = np.sqrt(cov[i, i])
        row = np.zeros(cm.n)
        row[vid] = 1.0
        rows.append(row.copy())
        rhs.append(mu[i] + gamma * s)
        row2 = np.zeros(cm.n)
        row2[vid] = -1.0
        rows.append(row2)
        rhs.append(-(mu[i] - gamma * s))
    return rows, rhs


def solve(model: ModelIR, cfg: SolverConfig | None = None) -> Solution:
    """Exact solve: branch-and-bound plus the quadratic cut loop."""
    cfg = cfg or SolverConfig()
    cm = compile_model(model)
    stats = {"nodes": 0, "cuts": 0, "simplex_iters": 0}
    deadline = time.monotonic() + cfg.time_limit if cfg.time_limit else None

    cut_A: list = []
    cut_b: list = []
    if cm.quad is not None:
        rows, rhs = _seed_cuts(cm)
        cut_A.extend(rows)
        cut_b.extend(rhs)
        stats["cuts"] += len(rows)

    loop_cuts = 0
    best_viol = np.inf
    best_iter = None           # (x, obj, bound) with the smallest violation
    recent = []                # last master optima, for stall detection
    prev_obj = None
    while True:
        status, x, obj, bound = _branch_and_bound(
            cm, cut_A, cut_b, cfg, stats, deadline)
        if status != OPTIMAL or cm.quad is None:
            break
        ids = np.asarray(cm.quad[0], dtype=np.int64)
        xv = x[ids]
        gsq = linalg.quadratic_form(xv, cm.quad[1], cm.quad[2])
        viol = gsq - cm.quad[3] ** 2
        if viol <= cfg.oa_tol:
            break
        if viol < best_viol:
            best_viol = viol
            best_iter = (x, obj, bound)
        oscale = 1.0 + abs(obj)
        plateau = prev_obj is not None and obj <= prev_obj + 1e-12 * oscale
        stalled = any(float(np.abs(xv - px).max()) <= 1e-11 *
                      (1.0 + float(np.abs(xv).max())) for px in recent)
        if plateau or stalled:
            # piecewise-constant objectives plateau while cuts reshape the
            # optimal region, and near the LP resolution floor new cuts stop
            # moving the optimum; in both cases try an interior projection
            accepted = _try_interior_accept(cm, cut_A, cut_b, cfg, stats,
                                            deadline, xv, obj, bound)
            if accepted is not None:
                x, obj = accepted
                break
            if stalled:
                x, obj, bound = best_iter
                break
        prev_obj = obj
        recent = (recent + [xv.copy()])[-2:]
        if loop_cuts >= cfg.max_cuts:
            status = LIMIT
            break
        u = xv - cm.quad[1]
        normal = cm.quad[2] @ u
        point = cm.quad[1] + (cm.quad[3] / np.sqrt(gsq)) * u
        row = np.zeros(cm.n)
        row[ids] = normal
        cut_A.append(row)
        cut_b.append(float(normal @ point))
        loop_cuts += 1
        stats["cuts"] += 1

    if status in (INFEASIBLE, UNBOUNDED):
        return Solution(status, None, None, None, stats)

    objective = obj
    best_bound = bound
    if cm.negate and objective is not None:
        objective = -objective
        best_bound = -best_bound if best_bound is not None else None
    sol = Solution(status, x, objective, best_bound, stats)
    if x is not None:
        _decode(cm, sol)
    return sol


def solve_lp(model: ModelIR, cfg: SolverConfig | None = None) -> Solution:
    """Continuous relaxation: binaries relaxed to their box, no quadratic."""
    if model.quadratic is not None:
        raise ValueError("quadratic rows are handled by solve()'s cut loop")
    cfg = cfg or SolverConfig()
    cm = compile_model(model)
    res = _node_lp(cm, None, None, cm.lo, cm.hi, cfg, refine=True)
    if res.status == "optimal":
        obj = -res.obj if cm.negate else res.obj
        return Solution(OPTIMAL, res.x, obj, obj,
                        {"nodes": 1, "cuts": 0, "simplex_iters": res.iters},
                        {"lp": res})
    status = INFEASIBLE if res.status == "infeasible" else UNBOUNDED
    return Solution(status, None, None, None,
                    {"nodes": 1, "cuts": 0, "simplex_iters": res.iters})


# -- solution decoding --------------------------------------------------------

def _decode(cm: CompiledModel, sol: Solution) -> None:
    """Attach decision vector and canonical auxiliary values.

    Forest models: recompute the objective from the chosen leaves (exactly
    the same summation the brute-force oracle uses). K-nearest models: set
    deviation, distance, selection, and order-statistic variables to their
    canonical values implied by x; this keeps the reported auxiliaries
    consistent with independently recomputed distances.
    """
    meta = cm.model.meta
    if cm.model.x_ids:
        sol.aux["x_ids"] = list(cm.model.x_ids)
        sol.x_decision = sol.x[np.asarray(cm.model.x_ids, dtype=np.int64)]
    else:
        sol.x_decision = sol.x.copy()
    values = sol.x.copy()

    forest = meta.get("forest")
    if forest is not None:
        chosen = []
        acc = 0.0
        for tree_leaves in forest["trees"]:   # list of (pid, leaf_value)
            pids = np.asarray([p for p, _ in tree_leaves], dtype=np.int64)
            vals = np.asarray([v for _, v in tree_leaves])
            pick = int(np.argmax(sol.x[pids]))
            chosen.append(pick)
            acc += vals[pick]
        pred = acc / len(forest["trees"])
        sol.aux["forest_leaves"] = chosen
        sol.objective = pred

    knn = meta.get("knn")
    if knn is not None:
        ref = knn["ref"]
        xd = sol.x_decision
        diffs = ref - xd[None, :]
        w = np.abs(diffs).sum(axis=1)
        order = np.argsort(w, kind="stable")
        K = knn["K"]
        z = w[order[:K]]
        values[np.asarray(knn["w_ids"], dtype=np.int64)] = w
        dp = np.maximum(diffs, 0.0)       # d+ = max(ref - x, 0)
        dm = np.maximum(-diffs, 0.0)
        values[np.asarray(knn["dp_ids"], dtype=np.int64).ravel()] = dp.T.ravel()
        values[np.asarray(knn["dm_ids"], dtype=np.int64).ravel()] = dm.T.ravel()
        pi = np.zeros((K, ref.shape[0]))
        for k in range(K):
            pi[k, order[:k + 1]] = 1.0
        values[np.asarray(knn["pi_ids"], dtype=np.int64).ravel()] = pi.ravel()
        values[np.asarray(knn["z_ids"], dtype=np.int64)] = z
        sol.aux["knn_z"] = z.copy()
        sol.aux["knn_mean_dist"] = float(z.mean())

    maha = cm.quad
    if maha is not None:
        x_ids, mu, cinv, gamma = maha
        g2 = linalg.quadratic_form(sol.x[np.asarray(x_ids, dtype=np.int64)],
                                   mu, cinv)
        sol.aux["mahalanobis"] = float(np.sqrt(g2))

    sol.aux["values"] = values

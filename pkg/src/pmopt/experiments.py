"""Orchestrate the benchmark study: generate, train, encode, solve, audit,
and aggregate true outcomes per scenario.

A scenario is a (function, noise kind) pair; each instance inside it is one
(noise value, seed) draw. Per instance, each predictor family trains once
via grid search and is then solved unconstrained, with the covariance
ellipsoid, and with the nearest-neighbor constraint. Every reported outcome
passes an independent feasibility audit of its own model.

Runs are independent jobs dispatched to a process pool; results are reduced
in instance order so the output is deterministic for a fixed configuration.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .benchgen import (GeneratedInstance, NoiseSpec, generate_instance,
                       true_value)
from .encode import PmoProblem, Relevance, build
from .errors import MissingCell, NonPositiveBaseline
from .predictors import DEFAULT_GRIDS, grid_search
from .solver import (OPTIMAL, SolverConfig, audit_solution, knn_audit,
                     mahalanobis_audit, solve)

VARIANTS = ("none", "md", "knn")
VARIANT_LABEL = {"none": "pmo", "md": "md", "knn": "knn"}

FULL_SCALE_GRIDS = {
    "linear": [{}],
    "forest": [{"n_trees": t, "max_depth": d, "min_leaf": 8}
               for t in (10, 50, 100, 200) for d in (5, 10, 15, 20)],
    "mlp": [{"hidden": h, "epochs": 500, "step": 0.05}
            for h in ((2, 2, 2), (4, 4, 4), (6, 6, 6), (8, 8, 8),
                      (10, 10, 10), (2, 6, 10), (10, 6, 2), (4, 8, 4),
                      (8, 4, 8), (6, 10, 6), (10, 2, 10), (2, 10, 2),
                      (4, 4, 8), (8, 8, 4), (6, 2, 4), (2, 4, 2),
                      (10, 8, 6), (6, 8, 10), (4, 10, 8), (8, 2, 6))],
}


@dataclass
class ScenarioConfig:
    """Desk-scale defaults; ``full_scale()`` switches to study-size values."""

    functions: tuple = ("powell", "quintic")
    deltas: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
    betas: tuple = (2.0, 2.2, 2.4, 2.6, 2.8, 3.0)
    seeds: tuple = (0, 1, 2)
    families: tuple = ("linear", "forest", "mlp")
    variants: tuple = VARIANTS
    n_samples: int = 300
    drop_fraction: float = 0.1
    split_ratio: float = 0.7
    md_alpha: float = 0.05
    md_stats: str = "train"            # train | postdrop
    knn_k: int = 1
    knn_gamma_per_dim: float = 0.01    # gamma = 0.01 * n
    knn_reference_cap: int = 24
    grids: dict | None = None
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(
        rel_gap=1e-4, node_limit=60_000, time_limit=600.0))
    parallelism: int = 2

    @staticmethod
    def full_scale() -> "ScenarioConfig":
        return ScenarioConfig(
            deltas=(0.1, 0.2, 0.3, 0.4, 0.5, 0.6),
            betas=tuple(round(2.0 + 0.1 * k, 1) for k in range(11)),
            seeds=tuple(range(10)),
            n_samples=1000,
            knn_reference_cap=200,
            grids=FULL_SCALE_GRIDS,
            solver=SolverConfig(rel_gap=1e-4, node_limit=500_000,
                                time_limit=1800.0),
        )

    def noise_specs(self, function: str):
        del function
        specs = [NoiseSpec("constant", d) for d in self.deltas]
        specs += [NoiseSpec("nonconstant", b) for b in self.betas]
        return specs

    def jobs(self):
        out = []
        for fn in self.functions:
            for spec in self.noise_specs(fn):
                for seed in self.seeds:
                    out.append((fn, spec, int(seed)))
        return out


@dataclass
class RunResult:
    instance_id: str
    scenario: str
    family: str
    variant: str
    status: str
    x: list | None
    predicted: float | None
    true_outcome: float | None
    best_in_sample: float
    test_r2: float
    wall_time: float
    nodes: int
    cuts: int
    audit_ok: bool


def scenario_of(inst: GeneratedInstance) -> str:
    return f"{inst.function.name}-{inst.noise.kind}"


def best_in_sample(inst: GeneratedInstance) -> float:
    """Minimum true value over the retained (post-drop) sample points."""
    return float(inst.postdrop_truths.min())


def _relevance_for(inst: GeneratedInstance, variant: str,
                   cfg: ScenarioConfig) -> Relevance:
    if variant == "none":
        return Relevance.none()
    if variant == "md":
        data = inst.train if cfg.md_stats == "train" else inst.postdrop
        return Relevance.mahalanobis(data, alpha=cfg.md_alpha)
    if variant == "knn":
        ref = inst.postdrop.X
        cap = cfg.knn_reference_cap
        if cap and ref.shape[0] > cap:
            rng = np.random.default_rng([inst.seed, 1099])
            pick = np.sort(rng.choice(ref.shape[0], size=cap, replace=False))
            ref = ref[pick]
        gamma = cfg.knn_gamma_per_dim * inst.function.dim
        return Relevance.knn(ref, cfg.knn_k, gamma)
    raise ValueError(f"unknown variant {variant!r}")


def _train(inst: GeneratedInstance, family: str, cfg: ScenarioConfig):
    grids = cfg.grids or DEFAULT_GRIDS
    fam_idx = ("linear", "forest", "mlp").index(family)
    rng = np.random.default_rng([inst.seed, fam_idx])
    return grid_search(inst.train, inst.test, family,
                       grid=grids[family], rng=rng)


def run_one(inst: GeneratedInstance, family: str, variant: str,
            cfg: ScenarioConfig, trained=None) -> RunResult:
    """Train (if needed), encode, solve, audit, and evaluate one run.

    Solver failures land in the status field; only audited Optimal runs
    carry a true outcome."""
    t0 = time.monotonic()
    model_r2 = trained if trained is not None else _train(inst, family, cfg)
    predictor, r2 = model_r2
    rel = _relevance_for(inst, variant, cfg)
    prob = PmoProblem(predictor, "min", 0.0, 1.0, relevance=rel)
    ir = build(prob)
    sol = solve(ir, cfg.solver)
    wall = time.monotonic() - t0
    base = dict(instance_id=inst.instance_id, scenario=scenario_of(inst),
                family=family, variant=variant, status=sol.status,
                best_in_sample=best_in_sample(inst), test_r2=r2,
                wall_time=wall, nodes=sol.stats.get("nodes", 0),
                cuts=sol.stats.get("cuts", 0))
    if sol.status != OPTIMAL or sol.x is None:
        return RunResult(x=None, predicted=None, true_outcome=None,
                         audit_ok=False, **base)
    ok = audit_solution(ir, sol.aux["values"], cfg.solver.feas_tol,
                        cfg.solver.int_tol, cfg.solver.oa_tol)["ok"]
    if rel.variant == "knn":
        ok = ok and knn_audit(sol.x_decision, rel.reference, rel.k, rel.gamma,
                              z_reported=sol.aux["knn_z"])["ok"]
    elif rel.variant == "mahalanobis":
        gamma = ir.meta["mahalanobis"]["gamma"]
        from .linalg import spd_inverse
        ok = ok and mahalanobis_audit(sol.x_decision, rel.mu,
                                      spd_inverse(rel.cov), gamma)["ok"]
    outcome = true_value(inst, np.clip(sol.x_decision, 0.0, 1.0))
    return RunResult(x=[float(v) for v in sol.x_decision],
                     predicted=sol.objective, true_outcome=outcome,
                     audit_ok=bool(ok), **base)


def run_instance(inst: GeneratedInstance, cfg: ScenarioConfig) -> list:
    """All family x variant runs for one instance; each family trains once."""
    out = []
    for family in cfg.families:
        trained = _train(inst, family, cfg)
        for variant in cfg.variants:
            out.append(run_one(inst, family, variant, cfg, trained=trained))
    return out


def _study_worker(args):
    fn, noise, seed, cfg = args
    inst = generate_instance(fn, noise, seed, n_samples=cfg.n_samples,
                             drop_fraction=cfg.drop_fraction,
                             split_ratio=cfg.split_ratio)
    return run_instance(inst, cfg)


def run_study(cfg: ScenarioConfig, progress=None) -> list:
    """Run every job in the configuration; deterministic result order."""
    jobs = [(fn, spec, seed, cfg) for fn, spec, seed in cfg.jobs()]
    results = []
    if cfg.parallelism and cfg.parallelism > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            for k, chunk in enumerate(pool.map(_study_worker, jobs)):
                results.extend(chunk)
                if progress:
                    progress(k + 1, len(jobs))
    else:
        for k, job in enumerate(jobs):
            results.extend(_study_worker(job))
            if progress:
                progress(k + 1, len(jobs))
    results.sort(key=lambda r: (r.instance_id, r.family, r.variant))
    return results


# -- aggregation ----------------------------------------------------------------

def improvement_pct(unconstrained_mean: float, constrained_mean: float) -> float:
    """100 * (1 - constrained / unconstrained)."""
    if unconstrained_mean <= 0:
        raise NonPositiveBaseline(f"baseline {unconstrained_mean} not positive")
    return 100.0 * (1.0 - constrained_mean / unconstrained_mean)


def aggregate(results, families=("linear", "forest", "mlp"),
              variants=VARIANTS, require_complete: bool = True) -> list:
    """Table rows: one dict per scenario plus an 'average' row.

    Cells are means of true outcomes over audited Optimal runs; counts ride
    along. require_complete raises MissingCell when a cell has no usable
    runs at all."""
    scenarios = sorted({r.scenario for r in results})
    rows = []
    for sc in scenarios:
        sub = [r for r in results if r.scenario == sc]
        row = {"scenario": sc}
        per_instance = {}
        for r in sub:
            per_instance[r.instance_id] = r.best_in_sample
        row["n_instances"] = len(per_instance)
        row["best_sample"] = float(np.mean(list(per_instance.values())))
        for fam in families:
            for var in variants:
                cell = [r.true_outcome for r in sub
                        if r.family == fam and r.variant == var
                        and r.status == OPTIMAL and r.audit_ok]
                label = f"{fam}_{VARIANT_LABEL[var]}"
                if not cell:
                    if require_complete:
                        raise MissingCell(f"no usable runs for {sc}/{label}")
                    row[label] = None
                    row[f"{label}_n"] = 0
                else:
                    row[label] = float(np.mean(cell))
                    row[f"{label}_n"] = len(cell)
        rows.append(row)
    if rows:
        avg = {"scenario": "average",
               "n_instances": int(np.sum([r["n_instances"] for r in rows]))}
        keys = [k for k in rows[0] if k not in ("scenario", "n_instances")]
        for k in keys:
            vals = [r[k] for r in rows if r[k] is not None]
            avg[k] = float(np.mean(vals)) if vals and not k.endswith("_n") \
                else int(np.sum(vals)) if vals else None
        rows.append(avg)
    return rows


def write_results_csv(results, path) -> None:
    cols = ["instance_id", "scenario", "family", "variant", "status",
            "predicted", "true_outcome", "best_in_sample", "test_r2",
            "wall_time", "nodes", "cuts", "audit_ok", "x"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in results:
            w.writerow([r.instance_id, r.scenario, r.family, r.variant,
                        r.status,
                        "" if r.predicted is None else repr(r.predicted),
                        "" if r.true_outcome is None else repr(r.true_outcome),
                        repr(r.best_in_sample), repr(r.test_r2),
                        f"{r.wall_time:.3f}", r.nodes, r.cuts,
                        int(r.audit_ok),
                        "" if r.x is None else ";".join(repr(v) for v in r.x)])


def write_aggregate_csv(rows, path) -> None:
    if not rows:
        raise MissingCell("nothing to aggregate")
    cols = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow(["" if row.get(c) is None
                        else (repr(row[c]) if isinstance(row[c], float) else row[c])
                        for c in cols])

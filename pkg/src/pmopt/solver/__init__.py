"""Embedded exact solver: two-phase simplex, branch-and-bound over binaries,
and an outer-approximation loop for the single quadratic row."""

from .audit import audit_solution, box_membership, knn_audit, mahalanobis_audit
from .bb import (INFEASIBLE, LIMIT, OPTIMAL, UNBOUNDED, CompiledModel,
                 SolverConfig, Solution, compile_model, solve, solve_lp)
from .oracles import (analytic_md_lr, brute_force_forest, grid_oracle_nn,
                      nn_lipschitz_l1)
from .simplex import (ArrayLP, LpResult, compute_duals, duality_residual,
                      refine_result, solve_arrays)

__all__ = [
    "ArrayLP", "LpResult", "solve_arrays", "compute_duals",
    "duality_residual", "refine_result", "SolverConfig", "Solution",
    "CompiledModel", "compile_model", "solve", "solve_lp", "OPTIMAL",
    "INFEASIBLE", "UNBOUNDED", "LIMIT", "analytic_md_lr",
    "brute_force_forest", "grid_oracle_nn", "nn_lipschitz_l1",
    "audit_solution", "knn_audit", "mahalanobis_audit", "box_membership",
]

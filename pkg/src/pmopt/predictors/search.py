"""Grid search over predictor hyper-parameters, scored by test-set R^2."""

from __future__ import annotations

import numpy as np

from .data import Dataset, r2_score
from .linear import fit_ols
from .neural import fit_mlp
from .trees import fit_forest

FAMILIES = ("linear", "forest", "mlp")

# desk-scale default grids; the full-scale study widens these
DEFAULT_GRIDS = {
    "linear": [{}],
    "forest": [{"n_trees": t, "max_depth": d, "min_leaf": 8}
               for t in (5, 10) for d in (3, 4)],
    "mlp": [{"hidden": h, "epochs": 300, "step": 0.05}
            for h in ((2, 2, 2), (4, 4, 4), (6, 6, 6), (4, 2, 2),
                      (6, 4, 2), (2, 4, 6), (4, 6, 4), (6, 2, 6),
                      (2, 6, 2), (4, 4, 2))],
}


def _fit_one(family: str, train: Dataset, params: dict,
             rng: np.random.Generator):
    if family == "linear":
        return fit_ols(train)
    if family == "forest":
        return fit_forest(train, rng=rng, **params)
    if family == "mlp":
        return fit_mlp(train, rng=rng, **params)
    raise ValueError(f"unknown family {family!r}")


def grid_search(train: Dataset, test: Dataset, family: str,
                grid=None, rng: np.random.Generator | None = None):
    """Fit every grid point and keep the best test R^2; ties keep the
    earliest grid entry. Returns (model, r2)."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    grid = list(DEFAULT_GRIDS[family] if grid is None else grid)
    if not grid:
        raise ValueError("grid must be non-empty")
    rng = rng or np.random.default_rng(0)
    child_rngs = rng.spawn(len(grid))
    best_model = None
    best_r2 = -np.inf
    for params, crng in zip(grid, child_rngs):
        model = _fit_one(family, train, params, crng)
        r2 = r2_score(model.predict(test.X), test.y)
        if r2 > best_r2:
            best_r2 = r2
            best_model = model
    return best_model, float(best_r2)

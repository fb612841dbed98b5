"""Regressor families used as optimization objectives, plus the data
protocol around them (scaling, splitting, model selection, persistence)."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch
from .data import (Dataset, MinMaxScaler, minmax_fit_transform, r2_score,
                   split_train_test)
from .linear import LinearModel, fit_ols
from .neural import NeuralNet, fit_mlp, init_net, loss_and_grads
from .persist import (family_of, load_model, model_from_dict, model_to_dict,
                      save_model)
from .search import DEFAULT_GRIDS, FAMILIES, grid_search
from .trees import RandomForest, RegressionTree, fit_forest, fit_tree

__all__ = [
    "Dataset", "MinMaxScaler", "minmax_fit_transform", "split_train_test",
    "r2_score", "LinearModel", "fit_ols", "RegressionTree", "fit_tree",
    "RandomForest", "fit_forest", "NeuralNet", "fit_mlp", "init_net",
    "loss_and_grads", "grid_search", "DEFAULT_GRIDS", "FAMILIES",
    "save_model", "load_model", "model_to_dict", "model_from_dict",
    "family_of", "predict",
]


def predict(model, x):
    """Evaluate any trained predictor at a single point or a batch."""
    x = np.asarray(x, dtype=float)
    if not hasattr(model, "predict"):
        raise DimensionMismatch(f"not a predictor: {type(model)!r}")
    return model.predict(x)

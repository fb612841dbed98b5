"""Versioned JSON persistence for trained predictors.

Document layout (format_version 1):

    {"format_version": 1, "family": "linear"|"forest"|"mlp",
     "scaler": {"min": [...], "max": [...]} | null,
     ...family payload...}

linear: {"intercept": f, "coef": [...]}
forest: {"trees": [{"feature": [...], "threshold": [...], "left": [...],
                    "right": [...], "value": [...]}], "n_features": n}
mlp:    {"layers": [{"w": [[...]], "b": [...]}]}

JSON floats round-trip exactly, so load(save(m)) reproduces the model.
"""

from __future__ import annotations

import json

import numpy as np

from .data import MinMaxScaler
from .linear import LinearModel
from .neural import NeuralNet
from .trees import RandomForest, RegressionTree, fit_tree  # noqa: F401

FORMAT_VERSION = 1


def family_of(model) -> str:
    if isinstance(model, LinearModel):
        return "linear"
    if isinstance(model, RandomForest):
        return "forest"
    if isinstance(model, NeuralNet):
        return "mlp"
    raise TypeError(f"not a trained predictor: {type(model)!r}")


def _tree_payload(t: RegressionTree) -> dict:
    return {
        "feature": t.feature.tolist(),
        "threshold": t.threshold.tolist(),
        "left": t.left.tolist(),
        "right": t.right.tolist(),
        "value": [None if np.isnan(v) else v for v in t.value.tolist()],
    }


def _tree_from_payload(d: dict, n_features: int) -> RegressionTree:
    feature = np.asarray(d["feature"], dtype=np.int32)
    threshold = np.asarray(d["threshold"], dtype=float)
    left = np.asarray(d["left"], dtype=np.int32)
    right = np.asarray(d["right"], dtype=np.int32)
    value = np.asarray([np.nan if v is None else v for v in d["value"]],
                       dtype=float)
    # rebuild leaf boxes by walking the split path from the root
    leaf_nodes, leaf_lo, leaf_hi, leaf_value = [], [], [], []
    stack = [(0, np.zeros(n_features), np.ones(n_features))]
    while stack:
        node, blo, bhi = stack.pop()
        if feature[node] < 0:
            leaf_nodes.append(node)
            leaf_lo.append(blo)
            leaf_hi.append(bhi)
            leaf_value.append(value[node])
            continue
        f, thr = int(feature[node]), float(threshold[node])
        rlo, rhi = blo.copy(), bhi.copy()
        rlo[f] = thr
        llo, lhi = blo.copy(), bhi.copy()
        lhi[f] = thr
        stack.append((int(right[node]), rlo, rhi))
        stack.append((int(left[node]), llo, lhi))
    order = np.argsort(leaf_nodes, kind="stable")
    return RegressionTree(
        n_features=n_features, feature=feature, threshold=threshold,
        left=left, right=right, value=value,
        leaf_nodes=np.asarray(leaf_nodes, dtype=np.int64)[order],
        leaf_lo=np.asarray(leaf_lo, dtype=float)[order],
        leaf_hi=np.asarray(leaf_hi, dtype=float)[order],
        leaf_value=np.asarray(leaf_value, dtype=float)[order],
    )


def model_to_dict(model, scaler: MinMaxScaler | None = None) -> dict:
    fam = family_of(model)
    doc = {"format_version": FORMAT_VERSION, "family": fam,
           "scaler": scaler.to_dict() if scaler is not None else None}
    if fam == "linear":
        doc["intercept"] = model.intercept
        doc["coef"] = model.coef.tolist()
    elif fam == "forest":
        doc["n_features"] = model.n_features
        doc["trees"] = [_tree_payload(t) for t in model.trees]
    else:
        doc["layers"] = [{"w": W.tolist(), "b": b.tolist()}
                         for W, b in model.weights]
    return doc


def model_from_dict(doc: dict):
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {doc.get('format_version')}")
    scaler = (MinMaxScaler.from_dict(doc["scaler"])
              if doc.get("scaler") else None)
    fam = doc["family"]
    if fam == "linear":
        model = LinearModel(doc["intercept"], np.asarray(doc["coef"]))
    elif fam == "forest":
        n = int(doc["n_features"])
        model = RandomForest([_tree_from_payload(t, n) for t in doc["trees"]])
    elif fam == "mlp":
        model = NeuralNet([(np.asarray(layer["w"], dtype=float),
                            np.asarray(layer["b"], dtype=float))
                           for layer in doc["layers"]])
    else:
        raise ValueError(f"unknown family {fam!r}")
    return model, scaler


def save_model(path, model, scaler: MinMaxScaler | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model, scaler), fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))

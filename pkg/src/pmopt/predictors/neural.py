"""Feed-forward rectifier networks trained by full-batch gradient descent.

The benchmark protocol uses three hidden layers; the type itself accepts any
depth. Training is deliberately simple: fixed step, momentum 0.9, mean
squared error, stop early only when the loss goes non-finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, DivergedTraining
from .data import Dataset

MOMENTUM = 0.9


@dataclass
class NeuralNet:
    weights: list          # [(W, b)] with W shaped (fan_in, fan_out)
    loss_history: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        for (Wp, _), (Wn, _) in zip(self.weights[:-1], self.weights[1:]):
            if Wp.shape[1] != Wn.shape[0]:
                raise DimensionMismatch("consecutive layer widths must chain")
        for (W, b) in self.weights:
            if W.shape[1] != b.shape[0]:
                raise DimensionMismatch("bias length must match layer width")

    @property
    def layer_dims(self) -> list:
        dims = [self.weights[0][0].shape[0]]
        dims += [W.shape[1] for W, _ in self.weights]
        return dims

    @property
    def n_features(self) -> int:
        return self.weights[0][0].shape[0]

    @property
    def n_hidden_layers(self) -> int:
        return len(self.weights) - 1

    def forward(self, X: np.ndarray):
        """Returns (output (q,), list of post-rectifier hidden activations)."""
        h = np.atleast_2d(np.asarray(X, dtype=float))
        if h.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"expected {self.n_features} features, got {h.shape[1]}")
        hidden = []
        for (W, b) in self.weights[:-1]:
            h = np.maximum(h @ W + b, 0.0)
            hidden.append(h)
        W, b = self.weights[-1]
        out = (h @ W + b).ravel()
        return out, hidden

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        out, _ = self.forward(X)
        return float(out[0]) if single else out


def init_net(n_features: int, hidden, rng: np.random.Generator) -> NeuralNet:
    dims = [n_features, *hidden, 1]
    weights = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        W = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        b = np.zeros(fan_out)
        weights.append((W, b))
    return NeuralNet(weights)


def loss_and_grads(net: NeuralNet, X: np.ndarray, y: np.ndarray):
    """Mean-squared-error loss and its gradients w.r.t. every W and b."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    q = X.shape[0]
    acts = [X]
    h = X
    for (W, b) in net.weights[:-1]:
        h = np.maximum(h @ W + b, 0.0)
        acts.append(h)
    W_out, b_out = net.weights[-1]
    out = (h @ W_out + b_out).ravel()
    resid = out - y
    loss = float(np.mean(resid ** 2))
    grads = [None] * len(net.weights)
    delta = (2.0 / q) * resid[:, None]             # dL/d(out), shape (q, 1)
    grads[-1] = (acts[-1].T @ delta, delta.sum(axis=0))
    back = delta @ W_out.T
    for k in range(len(net.weights) - 2, -1, -1):
        back = back * (acts[k + 1] > 0.0)
        W, _ = net.weights[k]
        grads[k] = (acts[k].T @ back, back.sum(axis=0))
        if k:
            back = back @ W.T
    return loss, grads


def fit_mlp(train: Dataset, hidden, epochs: int, step: float,
            rng: np.random.Generator) -> NeuralNet:
    """Full-batch gradient descent with momentum; raises DivergedTraining
    when the loss goes non-finite. epochs=0 returns the initialized net.

    Targets are standardized internally (gradient scale would otherwise
    track the raw target magnitude) and the normalization is folded back
    into the output layer, so the returned net predicts raw units."""
    if any(h < 1 for h in hidden):
        raise ValueError("hidden layer widths must be >= 1")
    y_loc = float(train.y.mean())
    y_scale = float(train.y.std())
    if y_scale <= 0.0:
        y_scale = 1.0
    y_norm = (train.y - y_loc) / y_scale
    net = init_net(train.n, hidden, rng)
    vel = [(np.zeros_like(W), np.zeros_like(b)) for W, b in net.weights]
    history = np.empty(max(epochs, 0))
    for ep in range(epochs):
        loss, grads = loss_and_grads(net, train.X, y_norm)
        if not np.isfinite(loss):
            raise DivergedTraining(f"loss became non-finite at epoch {ep}")
        history[ep] = loss
        new_weights = []
        for (W, b), (gW, gb), (vW, vb) in zip(net.weights, grads, vel):
            vW = MOMENTUM * vW - step * gW
            vb = MOMENTUM * vb - step * gb
            new_weights.append((W + vW, b + vb))
            vel[len(new_weights) - 1] = (vW, vb)
        net = NeuralNet(new_weights)
    W_out, b_out = net.weights[-1]
    net = NeuralNet(net.weights[:-1] + [(W_out * y_scale,
                                         b_out * y_scale + y_loc)])
    net.loss_history = history
    return net

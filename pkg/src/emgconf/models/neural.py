"""Softmax classifiers: linear logistic regression and ReLU multilayer perceptrons.

A network is a stack of affine layers; every hidden layer is followed by an
optional batch norm and a ReLU. Parameters live in a flat list of arrays:

    per hidden layer:  W, b          (no batch norm)
                       W, gamma, beta (batch norm; the affine bias is redundant)
    output layer:      W, b

Weight decay adds ``0.5 * lam * ||W||^2`` for weight matrices only.
"""
from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from ..optim import (
    AdamState,
    BatchNormState,
    NonFiniteLossError,
    adam_step,
    batchnorm_backward,
    batchnorm_forward,
    quasi_newton_minimize,
    relu,
    relu_backward,
    softmax,
    softmax_cross_entropy,
)
from .base import LabeledSamples

log = logging.getLogger(__name__)


class SoftmaxNetwork:
    def __init__(self, layer_sizes: Sequence[int], batch_norm: bool = False):
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.layer_sizes = [int(s) for s in layer_sizes]
        self.batch_norm = batch_norm
        n_hidden = len(self.layer_sizes) - 2
        self.running = [
            (np.zeros(h), np.ones(h)) for h in self.layer_sizes[1:-1]
        ] if batch_norm else []
        self.params: list = []
        self._n_hidden = n_hidden

    # -- parameter layout -------------------------------------------------

    def init_params(self, rng: np.random.Generator) -> list:
        """He-normal hidden weights; the output layer starts at zero."""
        params = []
        sizes = self.layer_sizes
        for i in range(self._n_hidden):
            params.append(rng.normal(0.0, np.sqrt(2.0 / sizes[i]), size=(sizes[i], sizes[i + 1])))
            if self.batch_norm:
                params += [np.ones(sizes[i + 1]), np.zeros(sizes[i + 1])]
            else:
                params.append(np.zeros(sizes[i + 1]))
        params += [np.zeros((sizes[-2], sizes[-1])), np.zeros(sizes[-1])]
        self.params = params
        return params

    def weight_mask(self) -> list:
        """True for arrays subject to weight decay."""
        per_hidden = [True, False, False] if self.batch_norm else [True, False]
        return per_hidden * self._n_hidden + [True, False]

    def shapes(self) -> list:
        return [p.shape for p in self.params]

    def pack(self, params: Sequence[np.ndarray]) -> np.ndarray:
        return np.concatenate([np.ravel(p) for p in params])

    def unpack(self, flat: np.ndarray, shapes=None) -> list:
        out, i = [], 0
        for shape in shapes or self.shapes():
            n = int(np.prod(shape))
            out.append(flat[i:i + n].reshape(shape))
            i += n
        return out

    # -- forward / backward -----------------------------------------------

    def forward(self, params, X, training: bool = False, update_running: bool = False):
        caches = []
        h = X
        j = 0
        for layer in range(self._n_hidden):
            W = params[j]
            z = h @ W
            if self.batch_norm:
                mean, var = self.running[layer]
                state = BatchNormState(params[j + 1], params[j + 2], mean, var)
                z, bn_cache = batchnorm_forward(z, state, training, update_running)
                if update_running:
                    self.running[layer] = (state.running_mean, state.running_var)
                j += 3
            else:
                z = z + params[j + 1]
                bn_cache = None
                j += 2
            caches.append((h, z, bn_cache))
            h = relu(z)
        logits = h @ params[j] + params[j + 1]
        caches.append((h, None, None))
        return logits, caches

    def backward(self, params, dlogits, caches) -> list:
        grads = [None] * len(params)
        j = len(params) - 2
        h_last = caches[-1][0]
        grads[j] = h_last.T @ dlogits
        grads[j + 1] = dlogits.sum(axis=0)
        dh = dlogits @ params[j].T
        step = 3 if self.batch_norm else 2
        for layer in reversed(range(self._n_hidden)):
            j -= step
            h_in, z, bn_cache = caches[layer]
            dz = relu_backward(dh, z)
            if self.batch_norm:
                dz, grads[j + 1], grads[j + 2] = batchnorm_backward(dz, bn_cache)
            else:
                grads[j + 1] = dz.sum(axis=0)
            grads[j] = h_in.T @ dz
            dh = dz @ params[j].T
        return grads

    def loss_and_grads(self, params, X, y, weight_decay: float, training: bool = True,
                       update_running: bool = False):
        logits, caches = self.forward(params, X, training, update_running)
        loss, dlogits = softmax_cross_entropy(logits, y)
        grads = self.backward(params, dlogits, caches)
        for i, decay in enumerate(self.weight_mask()):
            if decay and weight_decay:
                loss += 0.5 * weight_decay * float(np.sum(params[i] ** 2))
                grads[i] = grads[i] + weight_decay * params[i]
        return loss, grads

    def flat_objective(self, X, y, weight_decay: float, training: bool = True):
        """``f(flat) -> (loss, flat_grad)``; running statistics stay untouched."""
        shapes = self.shapes()

        def fg(flat):
            params = self.unpack(flat, shapes)
            loss, grads = self.loss_and_grads(params, X, y, weight_decay, training)
            return loss, self.pack(grads)

        return fg

    def predict_proba(self, X) -> np.ndarray:
        logits, _ = self.forward(self.params, np.atleast_2d(np.asarray(X, dtype=float)), training=False)
        return softmax(logits)

    def state_dict(self) -> dict:
        return {
            "layer_sizes": self.layer_sizes,
            "batch_norm": self.batch_norm,
            "params": [p.tolist() for p in self.params],
            "running": [[m.tolist(), v.tolist()] for m, v in self.running],
        }

    @classmethod
    def from_state(cls, state: dict) -> "SoftmaxNetwork":
        net = cls(state["layer_sizes"], state["batch_norm"])
        net.params = [np.array(p, dtype=float) for p in state["params"]]
        net.running = [(np.array(m, dtype=float), np.array(v, dtype=float)) for m, v in state["running"]]
        return net


def _check_finite(loss, where):
    if not np.isfinite(loss):
        raise NonFiniteLossError(f"training loss became {loss} ({where})")


class LogisticRegression:
    """Multinomial linear logistic regression trained with L-BFGS."""

    name = "llr"

    def __init__(self, weight_decay: float = 0.01, tol: float = 1e-6, max_iter: int = 500, seed=0):
        self.weight_decay = weight_decay
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed
        self.net_ = None
        self.loss_history_: list = []

    def fit(self, data: LabeledSamples) -> "LogisticRegression":
        net = SoftmaxNetwork([data.dim, data.n_classes])
        net.init_params(np.random.default_rng(self.seed))
        fg = net.flat_objective(data.features, data.labels, self.weight_decay)
        result = quasi_newton_minimize(fg, net.pack(net.params), self.tol, self.max_iter)
        _check_finite(result.loss, "L-BFGS")
        if not result.converged:
            log.info("LLR stopped after %d iterations with |grad|=%.3g", result.n_iter, result.grad_norm)
        net.params = net.unpack(result.x)
        self.net_ = net
        self.loss_history_ = result.losses
        return self

    def predict_proba(self, X) -> np.ndarray:
        return self.net_.predict_proba(X)

    def get_config(self) -> dict:
        return {"weight_decay": self.weight_decay, "tol": self.tol, "max_iter": self.max_iter}

    def state_dict(self) -> dict:
        return self.net_.state_dict()

    def load_state(self, state: dict) -> None:
        self.net_ = SoftmaxNetwork.from_state(state)


class MLP(LogisticRegression):
    """ReLU perceptron trained by mini-batch Adam on softmax cross-entropy."""

    name = "mlp"

    def __init__(self, hidden=(50,), batch_norm: bool = False, weight_decay: float = 1e-4,
                 learning_rate: float = 1e-3, batch_size: int = 128, epochs: int = 300, seed=0):
        self.hidden = tuple(int(h) for h in hidden)
        self.batch_norm = batch_norm
        self.weight_decay = weight_decay
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.net_ = None
        self.loss_history_ = []

    def _batches(self, n: int, rng: np.random.Generator):
        order = rng.permutation(n)
        batches = [order[i:i + self.batch_size] for i in range(0, n, self.batch_size)]
        # batch norm cannot normalize a single sample; fold it into the previous batch
        if self.batch_norm and len(batches) > 1 and len(batches[-1]) == 1:
            batches[-2] = np.concatenate([batches[-2], batches.pop()])
        return batches

    def fit(self, data: LabeledSamples) -> "MLP":
        rng = np.random.default_rng(self.seed)
        net = SoftmaxNetwork([data.dim, *self.hidden, data.n_classes], self.batch_norm)
        params = net.init_params(rng)
        state = AdamState.create(params, self.learning_rate)
        X, y = data.features, data.labels
        history = []
        for epoch in range(self.epochs):
            total = 0.0
            for b, idx in enumerate(self._batches(len(y), rng)):
                loss, grads = net.loss_and_grads(params, X[idx], y[idx], self.weight_decay,
                                                 training=True, update_running=True)
                _check_finite(loss, f"epoch {epoch + 1}, batch {b + 1}")
                params, state = adam_step(params, grads, state)
                total += loss * len(idx)
            history.append(total / len(y))
        net.params = params
        self.net_ = net
        self.loss_history_ = history
        return self

    def get_config(self) -> dict:
        return {
            "hidden": list(self.hidden),
            "batch_norm": self.batch_norm,
            "weight_decay": self.weight_decay,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
        }


class DeepMLP(MLP):
    name = "deep_mlp"

    def __init__(self, hidden=(100, 50, 25), batch_norm: bool = True, **kw):
        super().__init__(hidden=hidden, batch_norm=batch_norm, **kw)

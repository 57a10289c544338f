"""Training machinery for the discriminative classifiers.

Everything works on float64 numpy arrays. Parameters for the quasi-Newton
minimizer and the gradient checker are flat vectors; Adam works on a list
of arrays of any shape.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

LossAndGrad = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


class NonFiniteLossError(FloatingPointError):
    """Raised when an objective evaluates to NaN or infinity where a finite value is required."""


# ---------------------------------------------------------------------------
# Differentiable primitives

def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of integer ``labels`` and its gradient w.r.t. ``logits``."""
    n = logits.shape[0]
    log_probs = logits - logsumexp(logits, axis=1, keepdims=True)
    loss = -log_probs[np.arange(n), labels].mean()
    dlogits = np.exp(log_probs)
    dlogits[np.arange(n), labels] -= 1.0
    return float(loss), dlogits / n


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(dout: np.ndarray, x: np.ndarray) -> np.ndarray:
    return dout * (x > 0)


@dataclass
class BatchNormState:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.9
    eps: float = 1e-5

    @classmethod
    def create(cls, n_features: int, momentum: float = 0.9, eps: float = 1e-5) -> "BatchNormState":
        return cls(
            gamma=np.ones(n_features),
            beta=np.zeros(n_features),
            running_mean=np.zeros(n_features),
            running_var=np.ones(n_features),
            momentum=momentum,
            eps=eps,
        )


def batchnorm_forward(x: np.ndarray, state: BatchNormState, training: bool,
                      update_running: bool = True):
    """Normalize a ``(batch, features)`` array.

    Returns ``(out, cache)``; ``cache`` feeds :func:`batchnorm_backward`.
    In training mode batch statistics are used and, if ``update_running``,
    the running averages are moved toward them in place.
    """
    if training:
        n = x.shape[0]
        if n < 2:
            raise ValueError("batch norm in training mode needs a batch of at least 2 samples")
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        if update_running:
            m = state.momentum
            state.running_mean = m * state.running_mean + (1 - m) * mean
            state.running_var = m * state.running_var + (1 - m) * var * n / (n - 1)
    else:
        mean, var = state.running_mean, state.running_var
    inv_std = 1.0 / np.sqrt(var + state.eps)
    xhat = (x - mean) * inv_std
    out = state.gamma * xhat + state.beta
    return out, (xhat, inv_std, state.gamma, training)


def batchnorm_backward(dout: np.ndarray, cache):
    """Gradients ``(dx, dgamma, dbeta)`` of a batch-norm forward pass."""
    xhat, inv_std, gamma, training = cache
    dgamma = (dout * xhat).sum(axis=0)
    dbeta = dout.sum(axis=0)
    dxhat = dout * gamma
    if not training:
        return dxhat * inv_std, dgamma, dbeta
    n = dout.shape[0]
    dx = inv_std / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    return dx, dgamma, dbeta


# ---------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def create(cls, params: Sequence[np.ndarray], learning_rate: float = 1e-3, **kw) -> "AdamState":
        return cls(
            m=[np.zeros_like(p, dtype=float) for p in params],
            v=[np.zeros_like(p, dtype=float) for p in params],
            learning_rate=learning_rate,
            **kw,
        )


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              state: AdamState) -> tuple[list, AdamState]:
    """One bias-corrected Adam update. Inputs are not modified."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state hold different numbers of arrays")
    for p, g, m in zip(params, grads, state.m):
        if np.shape(p) != np.shape(g) or np.shape(p) != np.shape(m):
            raise ValueError(f"shape mismatch: param {np.shape(p)}, grad {np.shape(g)}, moment {np.shape(m)}")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_m = [b1 * m + (1 - b1) * g for m, g in zip(state.m, grads)]
    new_v = [b2 * v + (1 - b2) * np.square(g) for v, g in zip(state.v, grads)]
    c1 = 1 - b1**t
    c2 = 1 - b2**t
    new_params = [
        p - state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
        for p, m, v in zip(params, new_m, new_v)
    ]
    return new_params, replace(state, m=new_m, v=new_v, step=t)


# ---------------------------------------------------------------------------
# Limited-memory BFGS

@dataclass
class QuasiNewtonResult:
    x: np.ndarray
    loss: float
    grad_norm: float
    n_iter: int
    converged: bool
    losses: list = field(default_factory=list)


def quasi_newton_minimize(loss_and_grad: LossAndGrad, init, tol: float = 1e-6,
                          max_iter: int = 500, memory: int = 10,
                          armijo: float = 1e-4) -> QuasiNewtonResult:
    """L-BFGS with a backtracking Armijo line search.

    Stops when the Euclidean gradient norm drops to ``tol`` or after
    ``max_iter`` iterations. ``losses`` records the objective at every
    accepted iterate, starting with ``init``.
    """
    x = np.array(init, dtype=float).ravel()
    f, g = loss_and_grad(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise NonFiniteLossError(f"objective is not finite at the initial point (loss={f})")
    losses = [float(f)]
    pairs: deque = deque(maxlen=memory)
    gnorm = float(np.linalg.norm(g))
    it = 0
    while gnorm > tol and it < max_iter:
        d = -_two_loop(g, pairs)
        slope = float(g @ d)
        if slope >= 0:
            pairs.clear()
            d = -g
            slope = -gnorm**2
        t = 1.0 if pairs else min(1.0, 1.0 / gnorm)
        while True:
            x_new = x + t * d
            f_new, g_new = loss_and_grad(x_new)
            if np.isfinite(f_new) and f_new <= f + armijo * t * slope:
                break
            t *= 0.5
            if t < 1e-20:
                return QuasiNewtonResult(x, float(f), gnorm, it, False, losses)
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            pairs.append((s, y, 1.0 / sy))
        x, f, g = x_new, f_new, g_new
        gnorm = float(np.linalg.norm(g))
        losses.append(float(f))
        it += 1
    return QuasiNewtonResult(x, float(f), gnorm, it, gnorm <= tol, losses)


def _two_loop(g: np.ndarray, pairs) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        q -= a * y
        alphas.append(a)
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


# ---------------------------------------------------------------------------
# Finite differences

def check_gradient(loss_and_grad: LossAndGrad, point, step: float = 1e-6) -> float:
    """Largest relative error between the analytic gradient and centered differences.

    Relative error per coordinate is ``|analytic - numeric| / max(1, |numeric|)``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.array(point, dtype=float).ravel()
    _, analytic = loss_and_grad(x)
    analytic = np.asarray(analytic, dtype=float).ravel()
    worst = 0.0
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        numeric = (loss_and_grad(xp)[0] - loss_and_grad(xm)[0]) / (2 * step)
        err = abs(analytic[i] - numeric) / max(1.0, abs(numeric))
        worst = max(worst, err)
    return worst

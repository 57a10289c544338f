"""Scale mixture model classifier.

Each class density is a mixture of ``K`` Gaussians whose covariances are
scaled by an inverse-gamma latent with shape and scale ``nu/2``. Marginally
the components are multivariate Student-t, and they are fitted per class by
EM with ``nu`` held fixed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .base import LabeledSamples, ModelFitError, regularized_cholesky
from .generative import _GenerativeClassifier, _mahalanobis_sq, empirical_log_priors, log_t_density


@dataclass
class TMixture:
    """One class: weights ``(K,)``, means ``(K, D)``, scale matrices ``(K, D, D)``."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    nu: float
    log_likelihood: list = field(default_factory=list)
    ridged_steps: int = 0

    def component_log_density(self, X: np.ndarray) -> np.ndarray:
        return np.column_stack([
            np.log(w) + log_t_density(X, mu, S, self.nu)
            for w, mu, S in zip(self.weights, self.means, self.covariances)
        ])

    def log_density(self, X: np.ndarray) -> np.ndarray:
        return logsumexp(self.component_log_density(X), axis=1)


@dataclass
class TMixtureParams:
    classes: list
    log_priors: np.ndarray

    def class_log_density(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.column_stack([m.log_density(X) for m in self.classes])

    def to_dict(self) -> dict:
        return {
            "log_priors": self.log_priors.tolist(),
            "classes": [
                {
                    "nu": m.nu,
                    "weights": m.weights.tolist(),
                    "means": m.means.tolist(),
                    "covariances": m.covariances.tolist(),
                }
                for m in self.classes
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TMixtureParams":
        classes = [
            TMixture(np.array(c["weights"]), np.array(c["means"]), np.array(c["covariances"]), c["nu"])
            for c in d["classes"]
        ]
        return cls(classes, np.array(d["log_priors"]))


def _m_step(X, resp, scale_w):
    """Weighted updates of mixing weights, means and scale matrices."""
    n, d = X.shape
    nk = resp.sum(axis=0)
    if np.any(nk <= d * 1e-8):
        raise ModelFitError(f"mixture component lost all responsibility (sizes {nk.tolist()})")
    weights = nk / n
    rw = resp * scale_w
    means = (rw.T @ X) / rw.sum(axis=0)[:, None]
    covs = np.empty((resp.shape[1], d, d))
    ridged = False
    for k in range(resp.shape[1]):
        diff = X - means[k]
        raw = (rw[:, k, None] * diff).T @ diff / nk[k]
        covs[k] = regularized_cholesky(raw)[0]
        ridged |= not np.array_equal(covs[k], 0.5 * (raw + raw.T))
    return weights, means, covs, ridged


def fit_t_mixture(X: np.ndarray, n_components: int = 1, nu: float = 0.1, tol: float = 1e-8,
                  max_iter: int = 300, rng=None) -> TMixture:
    """EM for a mixture of multivariate t distributions with fixed ``nu``.

    A single component starts from the sample mean and ML covariance; more
    components start from Dirichlet-random responsibilities drawn from
    ``rng``. Iteration stops when the relative change of the log-likelihood
    drops below ``tol``. The log-likelihood before every M-step is kept in
    ``log_likelihood``; it is non-decreasing unless a collapsing component
    forced a covariance ridge, counted in ``ridged_steps``.
    """
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    if not nu > 0:
        raise ValueError("nu must be positive")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, d = X.shape
    if n_components == 1:
        resp = np.ones((n, 1))
    else:
        rng = np.random.default_rng(rng)
        resp = rng.dirichlet(np.ones(n_components), size=n)
    weights, means, covs, ridged = _m_step(X, resp, np.ones_like(resp))

    history = []
    ridged_steps = int(ridged)
    for _ in range(max_iter):
        chols = [np.linalg.cholesky(S) for S in covs]
        maha = np.column_stack([_mahalanobis_sq(X, mu, L) for mu, L in zip(means, chols)])
        log_comp = np.column_stack([
            np.log(w) + log_t_density(X, mu, None, nu, chol=L)
            for w, mu, L in zip(weights, means, chols)
        ])
        log_norm = logsumexp(log_comp, axis=1)
        ll = float(log_norm.sum())
        history.append(ll)
        if len(history) > 1 and abs(ll - history[-2]) <= tol * max(abs(history[-2]), 1e-300):
            break
        resp = np.exp(log_comp - log_norm[:, None])
        scale_w = (nu + d) / (nu + maha)
        weights, means, covs, ridged = _m_step(X, resp, scale_w)
        ridged_steps += ridged
    return TMixture(weights, means, covs, float(nu), history, ridged_steps)


def fit_smmc(data: LabeledSamples, K: int = 1, nu: float = 0.1, tol: float = 1e-8,
             max_iter: int = 300, seed=0) -> TMixtureParams:
    data.require_estimable()
    seeds = np.random.SeedSequence(seed).spawn(data.n_classes)
    classes = [
        fit_t_mixture(data.features[data.labels == c], K, nu, tol, max_iter,
                      rng=np.random.default_rng(seeds[c]))
        for c in range(data.n_classes)
    ]
    return TMixtureParams(classes, empirical_log_priors(data))


class SMMC(_GenerativeClassifier):
    name = "smmc"

    def __init__(self, K: int = 1, nu: float = 0.1, tol: float = 1e-8, max_iter: int = 300, seed=0):
        self.K = K
        self.nu = nu
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, data: LabeledSamples) -> "SMMC":
        self.params_ = fit_smmc(data, self.K, self.nu, self.tol, self.max_iter, self.seed)
        return self

    def get_config(self) -> dict:
        return {"K": self.K, "nu": self.nu, "tol": self.tol, "max_iter": self.max_iter}

    def state_dict(self) -> dict:
        return self.params_.to_dict()

    def load_state(self, state: dict) -> None:
        self.params_ = TMixtureParams.from_dict(state)

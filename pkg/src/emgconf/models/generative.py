"""Gaussian and Student-t class-conditional densities, LDA and QDA."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln

from .base import LabeledSamples, ModelFitError, posterior_from_log_joint, regularized_cholesky

LOG_2PI = math.log(2 * math.pi)


def _cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(np.atleast_2d(cov))
    except np.linalg.LinAlgError as exc:
        raise ModelFitError("covariance matrix is not positive definite") from exc


def _mahalanobis_sq(X: np.ndarray, mean: np.ndarray, chol: np.ndarray) -> np.ndarray:
    z = solve_triangular(chol, (X - mean).T, lower=True, check_finite=False)
    return np.einsum("ij,ij->j", z, z)


def _as_rows(x):
    x = np.asarray(x, dtype=float)
    return np.atleast_2d(x), x.ndim == 1


def log_gaussian_density(x, mean, cov, chol=None):
    """Log of N(x | mean, cov). ``x`` is one vector or an ``(N, D)`` array."""
    X, single = _as_rows(x)
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    L = _cholesky(cov) if chol is None else chol
    d = mean.shape[0]
    maha = _mahalanobis_sq(X, mean, L)
    out = -0.5 * d * LOG_2PI - np.log(np.diag(L)).sum() - 0.5 * maha
    return float(out[0]) if single else out


def log_t_density(x, mean, cov, nu: float, chol=None):
    """Log of the multivariate Student-t with scale matrix ``cov`` and ``nu`` degrees of freedom.

    This is the closed form of a Gaussian whose covariance ``u * cov`` is
    scaled by an inverse-gamma latent ``u ~ IG(nu/2, nu/2)``, integrated
    over ``u``.
    """
    if not nu > 0:
        raise ValueError(f"degrees of freedom must be positive, got {nu}")
    X, single = _as_rows(x)
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    L = _cholesky(cov) if chol is None else chol
    d = mean.shape[0]
    maha = _mahalanobis_sq(X, mean, L)
    out = (
        gammaln(0.5 * (nu + d))
        - gammaln(0.5 * nu)
        - 0.5 * d * math.log(nu * math.pi)
        - np.log(np.diag(L)).sum()
        - 0.5 * (nu + d) * np.log1p(maha / nu)
    )
    return float(out[0]) if single else out


@dataclass
class GaussianClassParams:
    """Class means ``(C, D)``, covariance ``(D, D)`` if shared else ``(C, D, D)``, log priors ``(C,)``."""

    means: np.ndarray
    covariances: np.ndarray
    log_priors: np.ndarray

    def __post_init__(self):
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.covariances = np.asarray(self.covariances, dtype=float)
        self.log_priors = np.asarray(self.log_priors, dtype=float)
        self._chols = None

    @property
    def shared(self) -> bool:
        return self.covariances.ndim == 2

    def covariance(self, c: int) -> np.ndarray:
        return self.covariances if self.shared else self.covariances[c]

    def class_log_density(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self._chols is None:
            if self.shared:
                L = _cholesky(self.covariances)
                self._chols = [L] * len(self.means)
            else:
                self._chols = [_cholesky(S) for S in self.covariances]
        return np.column_stack([
            log_gaussian_density(X, mu, None, chol=L) for mu, L in zip(self.means, self._chols)
        ])

    def to_dict(self) -> dict:
        return {
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "log_priors": self.log_priors.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianClassParams":
        return cls(np.array(d["means"]), np.array(d["covariances"]), np.array(d["log_priors"]))


def empirical_log_priors(data: LabeledSamples) -> np.ndarray:
    counts = data.class_counts()
    with np.errstate(divide="ignore"):
        return np.log(counts / counts.sum())


def _class_scatter(data: LabeledSamples):
    means = np.zeros((data.n_classes, data.dim))
    scatters = np.zeros((data.n_classes, data.dim, data.dim))
    for c in range(data.n_classes):
        Xc = data.features[data.labels == c]
        means[c] = Xc.mean(axis=0)
        centered = Xc - means[c]
        scatters[c] = centered.T @ centered
    return means, scatters


def fit_lda(data: LabeledSamples) -> GaussianClassParams:
    """Class means, pooled maximum-likelihood covariance and empirical priors."""
    data.require_estimable()
    means, scatters = _class_scatter(data)
    cov, _ = regularized_cholesky(scatters.sum(axis=0) / len(data))
    return GaussianClassParams(means, cov, empirical_log_priors(data))


def fit_qda(data: LabeledSamples) -> GaussianClassParams:
    """Class means, per-class maximum-likelihood covariances and empirical priors."""
    data.require_estimable()
    means, scatters = _class_scatter(data)
    counts = data.class_counts()
    covs = np.stack([
        regularized_cholesky(scatters[c] / counts[c])[0] for c in range(data.n_classes)
    ])
    return GaussianClassParams(means, covs, empirical_log_priors(data))


def predict_generative(params: Union[GaussianClassParams, "TMixtureParams"], X) -> np.ndarray:  # noqa: F821
    """Bayes posterior ``p(c | x)`` from class log densities and log priors."""
    return posterior_from_log_joint(params.class_log_density(X) + params.log_priors)


class _GenerativeClassifier:
    params_ = None

    def predict_proba(self, X) -> np.ndarray:
        if self.params_ is None:
            raise RuntimeError(f"{type(self).__name__} is not fitted")
        return predict_generative(self.params_, X)

    def log_joint(self, X) -> np.ndarray:
        return self.params_.class_log_density(X) + self.params_.log_priors


class LDA(_GenerativeClassifier):
    name = "lda"

    def fit(self, data: LabeledSamples) -> "LDA":
        self.params_ = fit_lda(data)
        return self

    def get_config(self) -> dict:
        return {}

    def state_dict(self) -> dict:
        return self.params_.to_dict()

    def load_state(self, state: dict) -> None:
        self.params_ = GaussianClassParams.from_dict(state)


class QDA(LDA):
    name = "qda"

    def fit(self, data: LabeledSamples) -> "QDA":
        self.params_ = fit_qda(data)
        return self

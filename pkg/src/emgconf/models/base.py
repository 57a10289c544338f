from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp


class ModelFitError(RuntimeError):
    """A classifier could not be fitted (e.g. a covariance that stays singular)."""


@dataclass
class LabeledSamples:
    """Feature rows with 0-based class indices.

    ``trials`` optionally records the trial each row came from.
    """

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    participant: Optional[str] = None
    trials: Optional[np.ndarray] = None

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=int).ravel()
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels"
            )
        if self.n_classes < 1:
            raise ValueError("n_classes must be >= 1")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(f"labels must lie in 0..{self.n_classes - 1}")

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.labels.shape[0]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def require_estimable(self, min_per_class: int = 2) -> None:
        counts = self.class_counts()
        short = np.flatnonzero(counts < min_per_class)
        if short.size:
            raise ModelFitError(
                f"classes {short.tolist()} have fewer than {min_per_class} training samples"
            )


def posterior_from_log_joint(log_joint: np.ndarray) -> np.ndarray:
    """Normalize ``log p(x, c)`` rows into posteriors with log-sum-exp."""
    log_joint = np.asarray(log_joint, dtype=float)
    return np.exp(log_joint - logsumexp(log_joint, axis=1, keepdims=True))


def check_posteriors(probs: np.ndarray, atol: float = 1e-9) -> np.ndarray:
    """Validate an ``(N, C)`` posterior matrix and return it as float array."""
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 2:
        raise ValueError(f"posterior matrix must be 2-D, got shape {probs.shape}")
    if np.any(probs < -atol) or np.any(probs > 1 + atol):
        raise ValueError("posterior entries must lie in [0, 1]")
    if not np.allclose(probs.sum(axis=1), 1.0, rtol=0, atol=atol):
        raise ValueError("posterior rows must sum to 1")
    return probs


def predict_and_confidence(posteriors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Predicted class (argmax, lowest index on ties) and its posterior."""
    posteriors = np.asarray(posteriors, dtype=float)
    labels = np.argmax(posteriors, axis=1)
    return labels, posteriors[np.arange(posteriors.shape[0]), labels]


def regularized_cholesky(cov: np.ndarray, eps_start: float = 1e-6, eps_max: float = 1e-2):
    """Cholesky factor of ``cov``, adding a scaled ridge if it is not positive definite.

    The ridge is ``eps * tr(cov)/D * I`` with ``eps`` growing tenfold from
    ``eps_start`` to ``eps_max``. Returns ``(cov_used, L)``.
    """
    cov = 0.5 * (cov + cov.T)
    try:
        return cov, np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    d = cov.shape[0]
    scale = np.trace(cov) / d
    if not scale > 0:
        scale = 1.0
    eps = eps_start
    while eps <= eps_max * (1 + 1e-9):
        reg = cov + eps * scale * np.eye(d)
        try:
            return reg, np.linalg.cholesky(reg)
        except np.linalg.LinAlgError:
            eps *= 10
    raise ModelFitError(f"covariance is not positive definite even with a ridge of {eps_max:g}*tr/D")

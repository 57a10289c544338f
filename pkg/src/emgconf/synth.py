"""Synthetic labelled data with known Bayes posteriors.

Classes are Gaussian or multivariate Student-t. Student-t draws use the
scale-mixture construction: a Gaussian draw whose covariance is multiplied
by an inverse-gamma latent ``u ~ IG(nu/2, nu/2)``. The exact posterior is
computed with ``scipy.stats`` densities, independently of the classifier
code in :mod:`emgconf.models`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from .models.base import LabeledSamples, posterior_from_log_joint
from .rng import make_rng

FAMILIES = ("gaussian", "student_t")


@dataclass
class ClassDistribution:
    mean: np.ndarray
    cov: np.ndarray
    family: str = "gaussian"
    nu: Optional[float] = None

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.family == "student_t" and not (self.nu and self.nu > 0):
            raise ValueError("student_t classes need nu > 0")
        if self.cov.shape != (self.mean.size, self.mean.size):
            raise ValueError("covariance shape does not match mean")
        np.linalg.cholesky(self.cov)

    def logpdf(self, X: np.ndarray) -> np.ndarray:
        if self.family == "gaussian":
            return np.atleast_1d(stats.multivariate_normal(self.mean, self.cov).logpdf(X))
        return np.atleast_1d(stats.multivariate_t(self.mean, self.cov, df=self.nu).logpdf(X))

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((n, self.mean.size)) @ np.linalg.cholesky(self.cov).T
        if self.family == "student_t":
            u = 1.0 / rng.gamma(self.nu / 2, 2.0 / self.nu, size=n)
            z *= np.sqrt(u)[:, None]
        return self.mean + z

    def to_dict(self) -> dict:
        d = {"family": self.family, "mean": self.mean.tolist(), "cov": self.cov.tolist()}
        if self.family == "student_t":
            d["nu"] = self.nu
        return d


@dataclass
class SyntheticSpec:
    classes: list
    priors: Optional[np.ndarray] = None
    seed: int = 0
    participants: int = 1
    trials: int = 4
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.classes = [c if isinstance(c, ClassDistribution) else ClassDistribution(**c)
                        for c in self.classes]
        if self.priors is None:
            self.priors = np.full(len(self.classes), 1.0 / len(self.classes))
        self.priors = np.asarray(self.priors, dtype=float)
        if self.priors.shape != (len(self.classes),) or np.any(self.priors < 0) \
                or not np.isclose(self.priors.sum(), 1.0):
            raise ValueError("priors must be a probability vector with one entry per class")
        if len({c.mean.size for c in self.classes}) != 1:
            raise ValueError("all classes need the same dimension")

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def dim(self) -> int:
        return self.classes[0].mean.size

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "participants": self.participants,
            "trials": self.trials,
            "priors": self.priors.tolist(),
            "classes": [c.to_dict() for c in self.classes],
            **self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        known = {"seed", "participants", "trials", "priors", "classes"}
        return cls(
            classes=[ClassDistribution(**c) for c in d["classes"]],
            priors=d.get("priors"),
            seed=d.get("seed", 0),
            participants=d.get("participants", 1),
            trials=d.get("trials", 4),
            extra={k: v for k, v in d.items() if k not in known},
        )

    @classmethod
    def load(cls, path) -> "SyntheticSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def sample(spec: SyntheticSpec, n: int, rng: Optional[np.random.Generator] = None) -> LabeledSamples:
    """Draw ``n`` labelled points; ``rng`` defaults to the spec's own ``"sample"`` stream."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rng if rng is not None else make_rng(spec.seed, "sample")
    labels = rng.choice(spec.n_classes, size=n, p=spec.priors)
    X = np.empty((n, spec.dim))
    for c, dist in enumerate(spec.classes):
        mask = labels == c
        X[mask] = dist.draw(int(mask.sum()), rng)
    return LabeledSamples(X, labels, spec.n_classes)


def true_posterior(spec: SyntheticSpec, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    with np.errstate(divide="ignore"):
        log_priors = np.log(spec.priors)
    log_joint = np.column_stack([d.logpdf(X) for d in spec.classes]) + log_priors
    return posterior_from_log_joint(log_joint)


def write_feature_dataset(spec: SyntheticSpec, n: int, root, name: str = "synthetic") -> Path:
    """Write ``n`` samples per (participant, trial) in the canonical layout.

    Files hold feature rows directly (``representation: features`` in the
    manifest). Each (participant, trial) uses stream
    ``(seed; participant, trial, "sample")``.
    """
    from .harness.dataset import DatasetManifest, write_dataset

    data = {}
    for p in range(1, spec.participants + 1):
        data[p] = {}
        for t in range(1, spec.trials + 1):
            s = sample(spec, n, make_rng(spec.seed, p, t, "sample"))
            counts = s.class_counts()
            if counts.min() < 1:
                raise ValueError(f"participant {p}, trial {t}: a class drew no samples; increase n")
            data[p][t] = {c + 1: s.features[s.labels == c] for c in range(spec.n_classes)}
    manifest = DatasetManifest(
        name=name,
        n_classes=spec.n_classes,
        n_channels=spec.dim,
        sample_rate_hz=1.0,
        participants=list(data),
        trials=list(range(1, spec.trials + 1)),
        representation="features",
    )
    return write_dataset(root, manifest, data)


def write_raw_dataset(root, amplitudes, sample_rate_hz: float = 1000.0, duration_s: float = 4.0,
                      participants: int = 2, trials: int = 4, nu: float = 4.0, segments: int = 8,
                      seed: int = 0, name: str = "synthetic-raw") -> Path:
    """Write raw EMG-like recordings in the canonical layout.

    Motion ``c`` on channel ``d`` is zero-mean Gaussian noise with standard
    deviation ``amplitudes[c][d]``, multiplied within each of ``segments``
    equal pieces by ``sqrt(u)`` with ``u ~ IG(nu/2, nu/2)`` to mimic
    contraction-level fluctuation.
    """
    from .harness.dataset import DatasetManifest, write_dataset

    amplitudes = np.asarray(amplitudes, dtype=float)
    n_classes, n_channels = amplitudes.shape
    T = int(round(duration_s * sample_rate_hz))
    data = {}
    for p in range(1, participants + 1):
        data[p] = {}
        for t in range(1, trials + 1):
            rng = make_rng(seed, p, t, "raw")
            data[p][t] = {}
            for c in range(n_classes):
                u = 1.0 / rng.gamma(nu / 2, 2.0 / nu, size=segments)
                gain = np.repeat(np.sqrt(u), -(-T // segments))[:T]
                noise = rng.standard_normal((T, n_channels))
                data[p][t][c + 1] = noise * amplitudes[c] * gain[:, None]
    manifest = DatasetManifest(
        name=name,
        n_classes=n_classes,
        n_channels=n_channels,
        sample_rate_hz=sample_rate_hz,
        participants=list(data),
        trials=list(range(1, trials + 1)),
    )
    return write_dataset(root, manifest, data)

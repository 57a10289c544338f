"""The six classifiers behind a common ``fit(data)`` / ``predict_proba(X)`` interface."""
from __future__ import annotations

import json
from pathlib import Path

from .base import (
    LabeledSamples,
    ModelFitError,
    check_posteriors,
    posterior_from_log_joint,
    predict_and_confidence,
    regularized_cholesky,
)
from .generative import (
    LDA,
    QDA,
    GaussianClassParams,
    fit_lda,
    fit_qda,
    log_gaussian_density,
    log_t_density,
    predict_generative,
)
from .neural import MLP, DeepMLP, LogisticRegression, SoftmaxNetwork
from .smmc import SMMC, TMixture, TMixtureParams, fit_smmc, fit_t_mixture

CLASSIFIERS = {
    "llr": LogisticRegression,
    "mlp": MLP,
    "deep_mlp": DeepMLP,
    "lda": LDA,
    "qda": QDA,
    "smmc": SMMC,
}

DISPLAY_NAMES = {
    "llr": "LLR",
    "mlp": "MLP",
    "deep_mlp": "Deep MLP",
    "lda": "LDA",
    "qda": "QDA",
    "smmc": "SMMC",
}

MODEL_FORMAT = "emgconf-model"
MODEL_FORMAT_VERSION = 1

_SEEDED = {"llr", "mlp", "deep_mlp", "smmc"}


def make_classifier(name: str, seed=0, **params):
    try:
        cls = CLASSIFIERS[name]
    except KeyError:
        raise ValueError(f"unknown classifier {name!r}; choose from {sorted(CLASSIFIERS)}") from None
    if name in _SEEDED:
        params["seed"] = seed
    return cls(**params)


def model_to_dict(model) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "classifier": model.name,
        "config": model.get_config(),
        "state": model.state_dict(),
    }


def model_from_dict(doc: dict):
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError("not a serialized emgconf model")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')}")
    model = CLASSIFIERS[doc["classifier"]](**doc["config"])
    model.load_state(doc["state"])
    return model


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))


__all__ = [
    "CLASSIFIERS",
    "DISPLAY_NAMES",
    "DeepMLP",
    "GaussianClassParams",
    "LDA",
    "LabeledSamples",
    "LogisticRegression",
    "MLP",
    "ModelFitError",
    "QDA",
    "SMMC",
    "SoftmaxNetwork",
    "TMixture",
    "TMixtureParams",
    "check_posteriors",
    "fit_lda",
    "fit_qda",
    "fit_smmc",
    "fit_t_mixture",
    "load_model",
    "log_gaussian_density",
    "log_t_density",
    "make_classifier",
    "model_from_dict",
    "model_to_dict",
    "posterior_from_log_joint",
    "predict_and_confidence",
    "predict_generative",
    "regularized_cholesky",
    "save_model",
]

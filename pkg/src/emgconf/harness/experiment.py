"""Per-participant train/test protocol over one or more datasets."""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..calibration import CalibrationReport, calibration_report
from ..models import CLASSIFIERS, LabeledSamples, make_classifier, model_to_dict, predict_and_confidence
from ..rng import stream_seed
from ..signal import RawRecording, extract_features, zscore_apply, zscore_fit
from .dataset import Dataset, DatasetError, load_dataset

log = logging.getLogger(__name__)


@dataclass
class FeatureConfig:
    cutoff_hz: float = 2.0
    stride: int = 1
    drop_transient: bool = False
    standardize: bool = False


@dataclass
class ClassifierSpec:
    """``label`` names the entry in reports; it defaults to ``name``."""

    name: str
    params: dict = field(default_factory=dict)
    label: Optional[str] = None

    def __post_init__(self):
        if self.name not in CLASSIFIERS:
            raise ValueError(f"unknown classifier {self.name!r}; choose from {sorted(CLASSIFIERS)}")
        if self.label is None:
            self.label = self.name


@dataclass
class DatasetRef:
    id: str
    root: Path


@dataclass
class ExperimentConfig:
    datasets: list
    classifiers: list = field(default_factory=lambda: [ClassifierSpec(n) for n in CLASSIFIERS])
    features: FeatureConfig = field(default_factory=FeatureConfig)
    train_trials: list = field(default_factory=lambda: [1, 2])
    test_trials: Optional[list] = None
    bins: int = 10
    seed: int = 0
    output_dir: Optional[Path] = None
    workers: int = 1
    save_models: bool = True

    def __post_init__(self):
        if self.bins < 1:
            raise ValueError("bins must be >= 1")
        if not self.train_trials:
            raise ValueError("at least one training trial is required")
        if self.test_trials is not None and set(self.train_trials) & set(self.test_trials):
            raise ValueError("training and test trials overlap")
        labels = [c.label for c in self.classifiers]
        if len(set(labels)) != len(labels):
            raise ValueError(f"classifier labels must be unique, got {labels}")

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ExperimentConfig":
        """Build from the JSON config dialect; relative paths resolve against ``base_dir``."""
        base = Path(base_dir) if base_dir is not None else Path.cwd()

        def resolve(p):
            p = Path(p)
            return p if p.is_absolute() else base / p

        if "datasets" in d:
            datasets = [DatasetRef(str(x["id"]), resolve(x["root"])) for x in d["datasets"]]
        elif "dataset_root" in d:
            root = resolve(d["dataset_root"])
            datasets = [DatasetRef(str(d.get("dataset_id", root.name)), root)]
        else:
            raise ValueError("config needs 'datasets' or 'dataset_root'")
        classifiers = [
            ClassifierSpec(c) if isinstance(c, str) else ClassifierSpec(c["name"], dict(c.get("params", {})), c.get("label"))
            for c in d.get("classifiers", list(CLASSIFIERS))
        ]
        kw = {k: d[k] for k in ("train_trials", "test_trials", "bins", "seed", "workers", "save_models") if k in d}
        out = d.get("output_dir")
        return cls(
            datasets=datasets,
            classifiers=classifiers,
            features=FeatureConfig(**d.get("features", {})),
            output_dir=resolve(out) if out else None,
            **kw,
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)


@dataclass
class CellResult:
    """One (dataset, participant, classifier) train/test run."""

    dataset: str
    participant: str
    classifier: str
    accuracy: float = math.nan
    ece: float = math.nan
    mce: float = math.nan
    n_test: int = 0
    report: Optional[CalibrationReport] = None
    confidences: Optional[np.ndarray] = None
    correct: Optional[np.ndarray] = None
    model: Optional[dict] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ResultRow:
    dataset: str
    classifier: str
    accuracy: float
    ece: float
    mce: float
    n_participants: int
    n_failed: int = 0


@dataclass
class ExperimentResult:
    rows: list
    cells: list
    bins: int = 10


def participant_samples(ds: Dataset, pid: str, trials, features: FeatureConfig) -> LabeledSamples:
    """Stack feature rows of the given trials; labels become 0-based."""
    m = ds.manifest
    recordings = ds.participant(pid)
    X, y, tr = [], [], []
    for t in trials:
        if t not in recordings:
            raise DatasetError(f"participant {pid}: trial {t} does not exist")
        for label in m.labels:
            arr = recordings[t][label]
            if m.representation == "raw":
                rec = RawRecording(arr.T, m.sample_rate_hz)
                feats = extract_features(rec, features.cutoff_hz, features.stride,
                                         features.drop_transient).features
            else:
                feats = arr[::features.stride]
            X.append(feats)
            y.append(np.full(len(feats), int(label) - 1))
            tr.append(np.full(len(feats), t))
    return LabeledSamples(np.vstack(X), np.concatenate(y), m.n_classes, participant=pid,
                          trials=np.concatenate(tr))


def split_trials(config: ExperimentConfig, ds: Dataset) -> tuple[list, list]:
    available = ds.manifest.trials
    train = list(config.train_trials)
    test = list(config.test_trials) if config.test_trials is not None else [t for t in available if t not in train]
    missing = [t for t in train + test if t not in available]
    if missing:
        raise DatasetError(f"dataset {ds.name}: trials {missing} are not in the manifest")
    if set(train) & set(test):
        raise ValueError("training and test trials overlap")
    if not test:
        raise ValueError(f"dataset {ds.name}: no test trials remain")
    return train, test


def run_participant(config: ExperimentConfig, dataset_id: str, root: Path, pid: str) -> list:
    """Fit and evaluate every configured classifier for one participant."""
    ds = load_dataset(root, lazy=True)
    train_trials, test_trials = split_trials(config, ds)
    try:
        train = participant_samples(ds, pid, train_trials, config.features)
        test = participant_samples(ds, pid, test_trials, config.features)
    except Exception as exc:  # noqa: BLE001
        return [CellResult(dataset_id, pid, c.label, error=f"{type(exc).__name__}: {exc}")
                for c in config.classifiers]
    if config.features.standardize:
        mean, std = zscore_fit(train.features)
        train.features = zscore_apply(train.features, mean, std)
        test.features = zscore_apply(test.features, mean, std)

    cells = []
    for spec in config.classifiers:
        cell = CellResult(dataset_id, pid, spec.label, n_test=len(test))
        try:
            # seeded by classifier only, so identical data gives identical results
            model = make_classifier(spec.name, seed=stream_seed(config.seed, "model", spec.label), **spec.params)
            model.fit(train)
            probs = model.predict_proba(test.features)
            pred, conf = predict_and_confidence(probs)
            correct = pred == test.labels
            report = calibration_report(conf, correct, config.bins)
            cell.accuracy = float(correct.mean())
            cell.ece, cell.mce = report.ece, report.mce
            cell.report, cell.confidences, cell.correct = report, conf, correct
            if config.save_models:
                cell.model = model_to_dict(model)
        except Exception as exc:  # noqa: BLE001
            log.warning("%s/p%s/%s failed: %s", dataset_id, pid, spec.label, exc)
            cell.error = f"{type(exc).__name__}: {exc}"
        cells.append(cell)
    return cells


def aggregate(cells: list, classifier_order=None) -> list:
    """Unweighted mean over participants of accuracy, ECE and MCE, per (dataset, classifier)."""
    order = {name: i for i, name in enumerate(classifier_order or CLASSIFIERS)}
    groups: dict = {}
    for c in cells:
        groups.setdefault((c.dataset, c.classifier), []).append(c)
    rows = []
    for (dataset, clf), group in groups.items():
        ok = [c for c in group if c.ok]
        mean = (lambda xs: math.fsum(xs) / len(xs)) if ok else (lambda xs: math.nan)
        rows.append(ResultRow(
            dataset, clf,
            accuracy=mean([c.accuracy for c in ok]),
            ece=mean([c.ece for c in ok]),
            mce=mean([c.mce for c in ok]),
            n_participants=len(ok),
            n_failed=len(group) - len(ok),
        ))
    rows.sort(key=lambda r: (r.dataset, order.get(r.classifier, len(order)), r.classifier))
    return rows


def _participant_sort_key(pid: str):
    return (0, int(pid), pid) if pid.isdigit() else (1, 0, pid)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    jobs = []
    for ref in config.datasets:
        ds = load_dataset(ref.root, lazy=True)
        split_trials(config, ds)
        jobs += [(ref.id, ref.root, pid) for pid in ds.manifest.participants]

    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(run_participant, config, *job) for job in jobs]
            results = [f.result() for f in futures]
    else:
        results = [run_participant(config, *job) for job in jobs]

    order = [c.label for c in config.classifiers]
    cells = [c for group in results for c in group]
    cells.sort(key=lambda c: (c.dataset, _participant_sort_key(c.participant), order.index(c.classifier)))
    return ExperimentResult(aggregate(cells, order), cells, config.bins)

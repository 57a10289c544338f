from .dataset import Dataset, DatasetError, DatasetManifest, load_dataset, write_dataset
from .experiment import (
    CellResult,
    ClassifierSpec,
    DatasetRef,
    ExperimentConfig,
    ExperimentResult,
    FeatureConfig,
    ResultRow,
    aggregate,
    run_experiment,
)
from .report import emit_report

__all__ = [
    "CellResult",
    "ClassifierSpec",
    "Dataset",
    "DatasetError",
    "DatasetManifest",
    "DatasetRef",
    "ExperimentConfig",
    "ExperimentResult",
    "FeatureConfig",
    "ResultRow",
    "aggregate",
    "emit_report",
    "load_dataset",
    "run_experiment",
    "write_dataset",
]

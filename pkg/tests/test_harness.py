import csv
import io
import json
import math

import numpy as np
import pytest

from emgconf.calibration import calibration_report
from emgconf.cli import main
from emgconf.harness import (
    ClassifierSpec,
    DatasetError,
    DatasetManifest,
    DatasetRef,
    ExperimentConfig,
    emit_report,
    load_dataset,
    run_experiment,
    write_dataset,
)
from emgconf.harness.experiment import CellResult, ResultRow, aggregate, participant_samples, split_trials
from emgconf.harness.report import METRICS_FIELDS, best_flags, metrics_csv
from emgconf.models import QDA, ModelFitError
from emgconf.synth import SyntheticSpec, write_feature_dataset, write_raw_dataset

FAST = [
    ClassifierSpec("llr"),
    ClassifierSpec("mlp", {"epochs": 5}),
    ClassifierSpec("deep_mlp", {"epochs": 2}),
    ClassifierSpec("lda"),
    ClassifierSpec("qda"),
    ClassifierSpec("smmc"),
]

SPEC = {
    "seed": 3,
    "participants": 2,
    "trials": 4,
    "classes": [
        {"mean": [0, 0], "cov": [[1, 0.2], [0.2, 1]]},
        {"mean": [2, 0.5], "cov": [[1, 0.2], [0.2, 1]]},
        {"mean": [0.5, 2], "cov": [[1, 0.2], [0.2, 1]]},
    ],
}


def small_manifest(**kw):
    base = dict(name="toy", n_classes=2, n_channels=2, sample_rate_hz=100.0, participants=[1], trials=[1, 2, 3])
    base.update(kw)
    return DatasetManifest(**base)


def toy_data(rng, channels=2, participants=(1,), trials=(1, 2, 3), labels=(1, 2), n=50):
    return {p: {t: {lab: rng.normal(size=(n, channels)) for lab in labels} for t in trials} for p in participants}


def feature_dataset(tmp_path, name="syn", n=200, **spec_kw):
    spec = SyntheticSpec.from_dict({**SPEC, **spec_kw})
    return write_feature_dataset(spec, n, tmp_path / name, name=name)


def read_csv(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


# -- loader -------------------------------------------------------------------------

def test_dataset_one_shape_accepted(tmp_path):
    rng = np.random.default_rng(0)
    m = DatasetManifest("I", 10, 2, 4000.0, [1], [1, 2, 3])
    root = write_dataset(tmp_path / "d1", m, toy_data(rng, labels=range(1, 11), n=20))
    ds = load_dataset(root)
    rec = ds.participant(1)
    assert sorted(rec) == [1, 2, 3]
    assert sorted(rec[1]) == list(range(1, 11))
    assert rec[2][7].shape == (20, 2)
    assert ds.manifest.sample_rate_hz == 4000.0


def test_extra_column_is_channel_mismatch(tmp_path):
    rng = np.random.default_rng(1)
    root = write_dataset(tmp_path / "d", small_manifest(), toy_data(rng))
    np.savetxt(root / "p1" / "t2" / "m1.csv", rng.normal(size=(10, 3)), delimiter=",")
    with pytest.raises(DatasetError, match="3 channels, manifest expects 2"):
        load_dataset(root)


def test_empty_file_names_participant_and_trial(tmp_path):
    root = write_dataset(tmp_path / "d", small_manifest(), toy_data(np.random.default_rng(2)))
    (root / "p1" / "t3" / "m2.csv").write_text("")
    with pytest.raises(DatasetError, match="participant 1, trial 3"):
        load_dataset(root)


def test_missing_trial(tmp_path):
    m = small_manifest(trials=[1, 2, 3, 4])
    root = write_dataset(tmp_path / "d", m, toy_data(np.random.default_rng(3)))
    with pytest.raises(DatasetError, match="trial 4 is missing"):
        load_dataset(root)


def test_label_outside_range(tmp_path):
    root = write_dataset(tmp_path / "d", small_manifest(), toy_data(np.random.default_rng(4)))
    np.savetxt(root / "p1" / "t1" / "m3.csv", np.ones((5, 2)), delimiter=",")
    with pytest.raises(DatasetError, match="label 3 outside 1..2"):
        load_dataset(root)
    with pytest.raises(DatasetError):
        small_manifest(labels=[1, 5])


def test_channel_subset_selects_columns(tmp_path):
    rng = np.random.default_rng(5)
    data = toy_data(rng, channels=6)
    m = small_manifest(n_channels=2, channel_subset=[2, 3], file_channels=6)
    root = write_dataset(tmp_path / "d", m, data)
    rec = load_dataset(root).participant(1)
    np.testing.assert_array_equal(rec[1][2], data[1][1][2][:, [2, 3]])


def test_non_finite_values_rejected(tmp_path):
    root = write_dataset(tmp_path / "d", small_manifest(), toy_data(np.random.default_rng(6)))
    (root / "p1" / "t1" / "m1.csv").write_text("1,nan\n2,3\n")
    with pytest.raises(DatasetError, match="non-finite"):
        load_dataset(root)


def test_written_values_round_trip_exactly(tmp_path):
    data = toy_data(np.random.default_rng(7))
    root = write_dataset(tmp_path / "d", small_manifest(), data)
    np.testing.assert_array_equal(load_dataset(root).participant(1)[3][2], data[1][3][2])


# -- protocol -------------------------------------------------------------------------

def test_trial_split_is_disjoint_and_complete(tmp_path):
    root = feature_dataset(tmp_path)
    ds = load_dataset(root)
    config = ExperimentConfig([DatasetRef("syn", root)])
    train, test = split_trials(config, ds)
    assert train == [1, 2] and test == [3, 4]
    tr = participant_samples(ds, "1", train, config.features)
    te = participant_samples(ds, "1", test, config.features)
    assert set(tr.trials) == {1, 2} and set(te.trials) == {3, 4}
    with pytest.raises(ValueError):
        ExperimentConfig([DatasetRef("syn", root)], train_trials=[1, 2], test_trials=[2, 3])
    with pytest.raises(DatasetError):
        split_trials(ExperimentConfig([DatasetRef("syn", root)], train_trials=[1, 9]), ds)


def test_raw_pipeline_feature_count(tmp_path):
    root = write_raw_dataset(tmp_path / "raw", [[1.0, 0.2], [0.2, 1.0]], sample_rate_hz=200.0,
                             duration_s=1.0, participants=1, trials=3)
    ds = load_dataset(root)
    config = ExperimentConfig([DatasetRef("raw", root)])
    config.features.stride = 10
    s = participant_samples(ds, "1", [1], config.features)
    assert s.features.shape == (2 * 20, 2)
    assert np.all(s.features >= 0)


def test_matched_generative_classifier_is_calibrated(tmp_path):
    root = feature_dataset(tmp_path, n=1500)
    config = ExperimentConfig([DatasetRef("syn", root)], classifiers=[ClassifierSpec("lda")])
    result = run_experiment(config)
    assert result.rows[0].ece < 0.03
    assert result.rows[0].n_participants == 2


def test_identical_participants_give_identical_rows(tmp_path):
    rng = np.random.default_rng(8)
    one = toy_data(rng, participants=(1,), n=60)
    m = small_manifest(participants=[1, 2], representation="features")
    root = write_dataset(tmp_path / "d", m, {1: one[1], 2: one[1]})
    result = run_experiment(ExperimentConfig([DatasetRef("d", root)], classifiers=FAST,
                                             train_trials=[1, 2]))
    by_pid = {}
    for c in result.cells:
        by_pid.setdefault(c.participant, []).append((c.classifier, c.accuracy, c.ece, c.mce))
    assert by_pid["1"] == by_pid["2"]


def test_aggregate_is_participant_mean(tmp_path):
    root = feature_dataset(tmp_path, participants=3, n=100)
    result = run_experiment(ExperimentConfig([DatasetRef("syn", root)], classifiers=FAST[3:]))
    for row in result.rows:
        cells = [c for c in result.cells if c.classifier == row.classifier]
        assert len(cells) == 3
        for metric in ("accuracy", "ece", "mce"):
            values = [getattr(c, metric) for c in cells]
            assert abs(getattr(row, metric) - sum(values) / 3) < 1e-12
        assert 0 <= row.accuracy <= 1 and 0 <= row.ece <= row.mce <= 1


def test_failed_cell_is_isolated(tmp_path, monkeypatch):
    def broken_fit(self, data):
        raise ModelFitError("singular")

    monkeypatch.setattr(QDA, "fit", broken_fit)
    root = write_dataset(tmp_path / "d", small_manifest(representation="features"),
                         toy_data(np.random.default_rng(9), n=30))
    result = run_experiment(ExperimentConfig([DatasetRef("d", root)],
                                             classifiers=[ClassifierSpec("lda"), ClassifierSpec("qda")]))
    status = {c.classifier: c.ok for c in result.cells}
    assert status == {"lda": True, "qda": False}
    assert "ModelFitError: singular" in result.cells[1].error
    rows = {r.classifier: r for r in result.rows}
    assert rows["qda"].n_failed == 1 and math.isnan(rows["qda"].ece)
    assert rows["lda"].n_failed == 0
    out = tmp_path / "out"
    emit_report(result, out)
    assert "ModelFitError" in (out / "participants.csv").read_text()
    assert not (out / "reliability" / "d-p1_qda.csv").exists()


def test_zero_variance_class_is_ridged_not_fatal(tmp_path):
    data = toy_data(np.random.default_rng(10), n=30)
    data[1][1][2] = np.ones((3, 2))
    data[1][2][2] = np.ones((3, 2))
    root = write_dataset(tmp_path / "d", small_manifest(representation="features"), data)
    result = run_experiment(ExperimentConfig([DatasetRef("d", root)], classifiers=[ClassifierSpec("qda")]))
    assert result.cells[0].ok


def test_aggregate_skips_failed_cells():
    cells = [
        CellResult("d", "1", "lda", 0.5, 0.1, 0.2),
        CellResult("d", "2", "lda", 0.7, 0.3, 0.4),
        CellResult("d", "3", "lda", error="boom"),
    ]
    (row,) = aggregate(cells)
    assert row.n_participants == 2 and row.n_failed == 1
    assert abs(row.accuracy - 0.6) < 1e-12


# -- reports ----------------------------------------------------------------------------

def test_report_files(tmp_path):
    root = feature_dataset(tmp_path, n=120)
    config = ExperimentConfig([DatasetRef("syn", root)], classifiers=FAST)
    result = run_experiment(config)
    out = tmp_path / "out"
    emit_report(result, out)
    metrics = read_csv(out / "metrics.csv")
    assert tuple(metrics[0].keys()) == METRICS_FIELDS
    assert len(metrics) == 6
    assert len(read_csv(out / "scatter.csv")) == 6
    for clf in ("llr", "smmc"):
        assert (out / "reliability" / f"syn-p1_{clf}.csv").is_file()
        assert (out / "reliability" / f"syn-p2_{clf}.svg").is_file()
        assert (out / "models" / f"syn-p1_{clf}.json").is_file()
        pooled = out / "reports" / f"syn-pooled_{clf}.json"
        cells = [c for c in result.cells if c.classifier == clf]
        expect = calibration_report(np.concatenate([c.confidences for c in cells]),
                                    np.concatenate([c.correct for c in cells]))
        assert json.loads(pooled.read_text())["ece"] == expect.ece
    rel = read_csv(out / "reliability" / "syn-p1_lda.csv")
    assert len(rel) == 10


def test_scatter_rows_cover_all_datasets(tmp_path):
    a = feature_dataset(tmp_path, "a", n=60)
    b = feature_dataset(tmp_path, "b", n=60, seed=4)
    config = ExperimentConfig([DatasetRef("a", a), DatasetRef("b", b)], classifiers=FAST[3:])
    out = tmp_path / "out"
    emit_report(run_experiment(config), out)
    rows = read_csv(out / "scatter.csv")
    assert len(rows) == 3 * 2
    assert "Dataset a" in (out / "scatter.svg").read_text()


def test_best_flags():
    rows = [
        ResultRow("d", "lda", 0.9, 0.05, 0.2, 1),
        ResultRow("d", "qda", 0.9, 0.02, 0.3, 1),
        ResultRow("d", "smmc", math.nan, math.nan, math.nan, 0, 1),
        ResultRow("e", "lda", 0.5, 0.10, 0.1, 1),
    ]
    flags = best_flags(rows)
    assert [flags[id(r)] for r in rows] == [
        (True, False, True), (True, True, False), (False, False, False), (True, True, True),
    ]
    lines = metrics_csv(rows).splitlines()
    assert lines[3].startswith("d,smmc,nan,nan,nan,0,1,0,0,0")


# -- CLI --------------------------------------------------------------------------------

def write_config(tmp_path, root, **extra):
    cfg = {
        "datasets": [{"id": "syn", "root": str(root)}],
        "classifiers": [{"name": "lda"}, {"name": "mlp", "params": {"epochs": 3}}, "smmc"],
        "seed": 11,
        **extra,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_cli_run_and_diagram(tmp_path, capsys):
    root = feature_dataset(tmp_path, n=80)
    cfg = write_config(tmp_path, root)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--bins", "5"]) == 0
    printed = capsys.readouterr().out
    assert printed == (tmp_path / "o" / "metrics.csv").read_text()
    assert len(read_csv(tmp_path / "o" / "reliability" / "syn-p1_lda.csv")) == 5
    for src in ("reliability/syn-p1_smmc.csv", "reports/syn-p2_smmc.json"):
        svg = tmp_path / f"{src.replace('/', '_')}.svg"
        assert main(["diagram", "--report", str(tmp_path / "o" / src), "--out", str(svg), "--title", "t"]) == 0
        assert svg.read_text().startswith("<svg")


def test_cli_classifier_subset(tmp_path, capsys):
    root = feature_dataset(tmp_path, n=80)
    cfg = write_config(tmp_path, root)
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--classifiers", "qda,lda"])
    rows = read_csv(tmp_path / "o" / "metrics.csv")
    assert [r["classifier"] for r in rows] == ["qda", "lda"]


def test_cli_synth(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SPEC))
    assert main(["synth", "--spec", str(spec), "--n", "30", "--out", str(tmp_path / "s")]) == 0
    ds = load_dataset(tmp_path / "s")
    assert ds.manifest.n_classes == 3 and ds.manifest.representation == "features"
    assert ds.manifest.participants == ["1", "2"]


def test_config_relative_paths(tmp_path):
    root = feature_dataset(tmp_path, n=20)
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"dataset_root": root.name, "output_dir": "out"}))
    cfg = ExperimentConfig.load(path)
    assert cfg.datasets[0].root == root and cfg.datasets[0].id == "syn"
    assert cfg.output_dir == tmp_path / "out"
    assert [c.label for c in cfg.classifiers] == ["llr", "mlp", "deep_mlp", "lda", "qda", "smmc"]

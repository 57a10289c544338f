"""Writing experiment results: metrics table, reliability diagrams, scatter plot, models."""
from __future__ import annotations

import csv
import io
import json
import math
import re
from pathlib import Path

import numpy as np

from ..calibration import calibration_report, reliability_csv, reliability_svg
from ..models import DISPLAY_NAMES
from .experiment import ExperimentResult

METRICS_FIELDS = (
    "dataset", "classifier", "accuracy", "ece", "mce", "n_participants", "n_failed",
    "best_accuracy", "best_ece", "best_mce",
)
PARTICIPANT_FIELDS = ("dataset", "participant", "classifier", "n_test", "accuracy", "ece", "mce", "error")
SCATTER_FIELDS = ("dataset", "classifier", "accuracy", "ece")


def _num(x) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def _safe(s: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", str(s))


def _display(name: str) -> str:
    return DISPLAY_NAMES.get(name, name)


def best_flags(rows) -> dict:
    """Per row, whether it has the best accuracy (max), ECE (min) and MCE (min) in its dataset.

    Ties are all marked; failed rows (NaN) are never best.
    """
    flags = {}
    by_dataset: dict = {}
    for r in rows:
        by_dataset.setdefault(r.dataset, []).append(r)
    for group in by_dataset.values():
        valid = [r for r in group if not math.isnan(r.accuracy)]
        best_acc = max((r.accuracy for r in valid), default=None)
        best_ece = min((r.ece for r in valid), default=None)
        best_mce = min((r.mce for r in valid), default=None)
        for r in group:
            ok = not math.isnan(r.accuracy)
            flags[id(r)] = (
                ok and r.accuracy == best_acc,
                ok and r.ece == best_ece,
                ok and r.mce == best_mce,
            )
    return flags


def metrics_csv(rows) -> str:
    flags = best_flags(rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_FIELDS)
    for r in rows:
        a, e, m = flags[id(r)]
        w.writerow([r.dataset, r.classifier, _num(r.accuracy), _num(r.ece), _num(r.mce),
                    r.n_participants, r.n_failed, int(a), int(e), int(m)])
    return buf.getvalue()


def participants_csv(cells) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PARTICIPANT_FIELDS)
    for c in cells:
        w.writerow([c.dataset, c.participant, c.classifier, c.n_test,
                    _num(c.accuracy), _num(c.ece), _num(c.mce), c.error or ""])
    return buf.getvalue()


def scatter_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCATTER_FIELDS)
    for r in rows:
        w.writerow([r.dataset, r.classifier, _num(r.accuracy), _num(r.ece)])
    return buf.getvalue()


def scatter_svg(rows, panel: int = 240) -> str:
    """One accuracy-vs-ECE panel per dataset, ECE on x and accuracy on y."""
    datasets = list(dict.fromkeys(r.dataset for r in rows))
    pad = 40
    width = panel * max(len(datasets), 1)
    colors = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]
    classifiers = list(dict.fromkeys(r.classifier for r in rows))
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{panel + 20 + 14 * len(classifiers)}" '
             'font-family="sans-serif" font-size="10">']
    for i, ds in enumerate(datasets):
        x0 = i * panel + pad
        size = panel - 2 * pad + 20
        group = [r for r in rows if r.dataset == ds and not math.isnan(r.accuracy)]
        max_ece = max([r.ece for r in group] + [0.05])
        max_ece = math.ceil(max_ece * 20) / 20
        parts.append(f'<rect x="{x0}" y="{pad}" width="{size}" height="{size}" fill="white" stroke="black"/>')
        parts.append(f'<text x="{x0 + size / 2}" y="{pad - 8}" text-anchor="middle" font-weight="bold">Dataset {ds}</text>')
        parts.append(f'<text x="{x0 + size / 2}" y="{pad + size + 26}" text-anchor="middle">ECE</text>')
        parts.append(f'<text x="{x0 - 4}" y="{pad + 4}" text-anchor="end">1.0</text>')
        parts.append(f'<text x="{x0 - 4}" y="{pad + size}" text-anchor="end">0.0</text>')
        parts.append(f'<text x="{x0 + size}" y="{pad + size + 12}" text-anchor="end">{max_ece:.2f}</text>')
        for r in group:
            cx = x0 + r.ece / max_ece * size
            cy = pad + (1 - r.accuracy) * size
            color = colors[classifiers.index(r.classifier) % len(colors)]
            parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="4" fill="{color}"/>')
    for j, clf in enumerate(classifiers):
        y = panel + 20 + 14 * j
        parts.append(f'<circle cx="{pad}" cy="{y - 4}" r="4" fill="{colors[j % len(colors)]}"/>')
        parts.append(f'<text x="{pad + 8}" y="{y}">{_display(clf)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def emit_report(result: ExperimentResult, out_dir) -> list:
    """Write all artifacts for ``result`` under ``out_dir``; returns the written paths."""
    if not result.rows:
        raise ValueError("no result rows to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(rel: str, text: str):
        p = out / rel
        _write(p, text)
        written.append(p)

    put("metrics.csv", metrics_csv(result.rows))
    put("participants.csv", participants_csv(result.cells))
    put("scatter.csv", scatter_csv(result.rows))
    put("scatter.svg", scatter_svg(result.rows))

    pooled: dict = {}
    for c in result.cells:
        if not c.ok:
            continue
        stem = f"{_safe(c.dataset)}-p{_safe(c.participant)}_{_safe(c.classifier)}"
        title = f"{_display(c.classifier)} (dataset {c.dataset}, participant {c.participant})"
        put(f"reliability/{stem}.csv", reliability_csv(c.report))
        put(f"reliability/{stem}.svg", reliability_svg(c.report, title))
        put(f"reports/{stem}.json", json.dumps(c.report.to_dict(), indent=1) + "\n")
        if c.model is not None:
            put(f"models/{stem}.json", json.dumps(c.model, indent=1) + "\n")
        acc = pooled.setdefault((c.dataset, c.classifier), ([], []))
        acc[0].append(c.confidences)
        acc[1].append(c.correct)

    for (dataset, clf), (confs, hits) in pooled.items():
        report = calibration_report(np.concatenate(confs), np.concatenate(hits), result.bins)
        stem = f"{_safe(dataset)}-pooled_{_safe(clf)}"
        title = f"{_display(clf)} (dataset {dataset}, all participants)"
        put(f"reliability/{stem}.csv", reliability_csv(report))
        put(f"reliability/{stem}.svg", reliability_svg(report, title))
        put(f"reports/{stem}.json", json.dumps(report.to_dict(), indent=1) + "\n")
    return written

"""Confidence binning, ECE, MCE and reliability diagrams.

Bins are half-open intervals ``((m-1)/M, m/M]`` for ``m = 1..M``; a
confidence of exactly 0 goes to the first bin. Empty bins are reported with
count 0 and accuracy = confidence = 0.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

CSV_FIELDS = ("bin_index", "lower", "upper", "count", "accuracy", "confidence", "gap")


@dataclass(frozen=True)
class BinStats:
    index: int
    count: int
    accuracy: float
    confidence: float
    lower: float
    upper: float

    @property
    def gap(self) -> float:
        return abs(self.accuracy - self.confidence)


@dataclass(frozen=True)
class CalibrationReport:
    bins: tuple
    n: int
    ece: float
    mce: float

    @property
    def n_bins(self) -> int:
        return len(self.bins)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "ece": self.ece,
            "mce": self.mce,
            "bins": [asdict(b) for b in self.bins],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationReport":
        return cls(tuple(BinStats(**b) for b in d["bins"]), d["n"], d["ece"], d["mce"])


def bin_edges(n_bins: int) -> np.ndarray:
    # i / M is correctly rounded, so edges coincide with decimal literals like 0.7
    return np.arange(n_bins + 1) / n_bins


def bin_indices(confidences, n_bins: int = 10) -> np.ndarray:
    """1-based bin index of every confidence."""
    conf = np.asarray(confidences, dtype=float)
    if n_bins < 1:
        raise ValueError("number of bins must be >= 1")
    if conf.size and (np.any(~np.isfinite(conf)) or conf.min() < 0 or conf.max() > 1):
        raise ValueError("confidences must lie in [0, 1]")
    return np.maximum(np.searchsorted(bin_edges(n_bins), conf, side="left"), 1)


def bin_predictions(confidences, correct, n_bins: int = 10) -> list:
    conf = np.asarray(confidences, dtype=float).ravel()
    hit = np.asarray(correct, dtype=bool).ravel()
    if conf.shape != hit.shape:
        raise ValueError("confidences and correctness flags differ in length")
    idx = bin_indices(conf, n_bins)
    edges = bin_edges(n_bins)
    bins = []
    for m in range(1, n_bins + 1):
        mask = idx == m
        count = int(mask.sum())
        if count:
            # exact sums make the statistics independent of prediction order
            acc = int(hit[mask].sum()) / count
            mean_conf = math.fsum(conf[mask]) / count
        else:
            acc = mean_conf = 0.0
        bins.append(BinStats(m, count, acc, mean_conf, float(edges[m - 1]), float(edges[m])))
    return bins


def ece(bins, n: int) -> float:
    if n <= 0:
        raise ValueError("ECE needs at least one prediction")
    total = sum(b.count for b in bins)
    if total != n:
        raise ValueError(f"bin counts sum to {total}, expected {n}")
    value = math.fsum(b.count * b.gap for b in bins) / n
    # a weighted mean never exceeds its largest term; keep rounding from breaking that
    return min(value, max(b.gap for b in bins))


def mce(bins) -> float:
    gaps = [b.gap for b in bins if b.count > 0]
    if not gaps:
        raise ValueError("MCE needs at least one non-empty bin")
    return max(gaps)


def calibration_report(confidences, correct, n_bins: int = 10) -> CalibrationReport:
    bins = bin_predictions(confidences, correct, n_bins)
    n = int(np.size(confidences))
    return CalibrationReport(tuple(bins), n, ece(bins, n), mce(bins))


def report_from_posteriors(posteriors, labels, n_bins: int = 10) -> CalibrationReport:
    posteriors = np.asarray(posteriors, dtype=float)
    pred = np.argmax(posteriors, axis=1)
    conf = posteriors[np.arange(len(pred)), pred]
    return calibration_report(conf, pred == np.asarray(labels), n_bins)


# ---------------------------------------------------------------------------
# Reliability diagram payloads

def _fmt(x: float) -> str:
    return repr(float(x))


def reliability_rows(report: CalibrationReport) -> list:
    return [
        {
            "bin_index": b.index,
            "lower": b.lower,
            "upper": b.upper,
            "count": b.count,
            "accuracy": b.accuracy,
            "confidence": b.confidence,
            "gap": b.gap,
        }
        for b in report.bins
    ]


def reliability_csv(report: CalibrationReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for row in reliability_rows(report):
        writer.writerow([
            row["bin_index"], _fmt(row["lower"]), _fmt(row["upper"]), row["count"],
            _fmt(row["accuracy"]), _fmt(row["confidence"]), _fmt(row["gap"]),
        ])
    return buf.getvalue()


def report_from_csv(text: str) -> CalibrationReport:
    """Rebuild a report from :func:`reliability_csv` output."""
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows or tuple(rows[0].keys()) != CSV_FIELDS:
        raise ValueError(f"expected CSV columns {','.join(CSV_FIELDS)}")
    bins = tuple(
        BinStats(int(r["bin_index"]), int(r["count"]), float(r["accuracy"]),
                 float(r["confidence"]), float(r["lower"]), float(r["upper"]))
        for r in rows
    )
    n = sum(b.count for b in bins)
    return CalibrationReport(bins, n, ece(bins, n), mce(bins))


def reliability_svg(report: CalibrationReport, title: str = "", size: int = 320) -> str:
    """Reliability diagram: accuracy bars over the bin intervals, the per-bin
    calibration gap in red between accuracy and mean confidence, and the
    dashed identity line."""
    pad = 40
    w = h = size
    plot = size - 2 * pad

    def px(v):
        return pad + v * plot

    def py(v):
        return pad + (1 - v) * plot

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h + 20}" '
        f'viewBox="0 0 {w} {h + 20}" font-family="sans-serif" font-size="11">',
        f'<rect x="{pad}" y="{pad}" width="{plot}" height="{plot}" fill="white" stroke="black"/>',
    ]
    for b in report.bins:
        x0, x1 = px(b.lower), px(b.upper)
        if b.count:
            parts.append(
                f'<rect class="acc" x="{x0:.2f}" y="{py(b.accuracy):.2f}" width="{x1 - x0:.2f}" '
                f'height="{py(0) - py(b.accuracy):.2f}" fill="#3b6fb6" stroke="#1d3d6b"/>'
            )
            top, bottom = max(b.accuracy, b.confidence), min(b.accuracy, b.confidence)
            parts.append(
                f'<rect class="gap" x="{x0:.2f}" y="{py(top):.2f}" width="{x1 - x0:.2f}" '
                f'height="{py(bottom) - py(top):.2f}" fill="red" fill-opacity="0.35" stroke="red"/>'
            )
    parts.append(
        f'<line x1="{px(0)}" y1="{py(0)}" x2="{px(1)}" y2="{py(1)}" '
        'stroke="gray" stroke-dasharray="4,3"/>'
    )
    for t in np.linspace(0, 1, 6):
        parts.append(f'<text x="{px(t):.2f}" y="{py(0) + 14:.2f}" text-anchor="middle">{t:.1f}</text>')
        parts.append(f'<text x="{pad - 4}" y="{py(t) + 4:.2f}" text-anchor="end">{t:.1f}</text>')
    parts.append(f'<text x="{w / 2}" y="{h - 6}" text-anchor="middle">Confidence</text>')
    parts.append(
        f'<text x="12" y="{h / 2}" text-anchor="middle" transform="rotate(-90 12 {h / 2})">Accuracy</text>'
    )
    label = f"ECE = {100 * report.ece:.2f}%  MCE = {100 * report.mce:.2f}%"
    parts.append(f'<text x="{pad + 6}" y="{pad + 16}">{label}</text>')
    if title:
        parts.append(f'<text x="{w / 2}" y="{pad - 12}" text-anchor="middle" font-weight="bold">{_escape(title)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def reliability_diagram(report: CalibrationReport, title: str = "") -> dict:
    """CSV rows plus rendered CSV and SVG text for one report."""
    return {
        "rows": reliability_rows(report),
        "csv": reliability_csv(report),
        "svg": reliability_svg(report, title),
    }

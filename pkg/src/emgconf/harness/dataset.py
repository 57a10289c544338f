"""Canonical on-disk dataset layout.

::

    <root>/manifest.json
    <root>/p<participant>/t<trial>/m<label>.csv

Each CSV holds one recording: one row per time sample, one column per
channel, plain decimals, no header. ``manifest.json`` fields:

``name``
    dataset identifier used in reports.
``classes``, ``channels``, ``sample_rate_hz``
    C, D and fs.
``participants``, ``trials``
    ids present on disk; every (participant, trial) holds one file per label.
``labels``
    optional, defaults to ``1..classes``.
``channel_subset``
    optional 0-based column indices to keep (e.g. one electrode band out of
    several); its length must equal ``channels``.
``file_channels``
    optional column count of the files when a subset is declared.
``representation``
    ``"raw"`` (default; filtered into features) or ``"features"`` (rows are
    already feature vectors).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1


class DatasetError(ValueError):
    """The dataset on disk does not match its manifest."""


@dataclass
class DatasetManifest:
    name: str
    n_classes: int
    n_channels: int
    sample_rate_hz: float
    participants: list
    trials: list
    labels: Optional[list] = None
    channel_subset: Optional[list] = None
    file_channels: Optional[int] = None
    representation: str = "raw"

    def __post_init__(self):
        if self.labels is None:
            self.labels = list(range(1, self.n_classes + 1))
        self.participants = [str(p) for p in self.participants]
        self.trials = [int(t) for t in self.trials]
        bad = [lab for lab in self.labels if not 1 <= int(lab) <= self.n_classes]
        if bad:
            raise DatasetError(f"labels {bad} lie outside 1..{self.n_classes}")
        if self.sample_rate_hz <= 0:
            raise DatasetError("sample_rate_hz must be positive")
        if self.representation not in ("raw", "features"):
            raise DatasetError(f"unknown representation {self.representation!r}")
        if self.channel_subset is not None:
            if len(self.channel_subset) != self.n_channels:
                raise DatasetError(
                    f"channel_subset has {len(self.channel_subset)} entries but channels={self.n_channels}"
                )
            if self.file_channels is not None and max(self.channel_subset) >= self.file_channels:
                raise DatasetError("channel_subset indexes beyond file_channels")

    @property
    def expected_file_channels(self) -> Optional[int]:
        if self.channel_subset is None:
            return self.n_channels
        return self.file_channels

    def to_dict(self) -> dict:
        d = {
            "format_version": FORMAT_VERSION,
            "name": self.name,
            "classes": self.n_classes,
            "channels": self.n_channels,
            "sample_rate_hz": self.sample_rate_hz,
            "participants": self.participants,
            "trials": self.trials,
            "labels": [int(x) for x in self.labels],
            "representation": self.representation,
        }
        if self.channel_subset is not None:
            d["channel_subset"] = list(self.channel_subset)
        if self.file_channels is not None:
            d["file_channels"] = self.file_channels
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        if d.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
            raise DatasetError(f"unsupported manifest format_version {d['format_version']}")
        try:
            return cls(
                name=str(d.get("name", "dataset")),
                n_classes=int(d["classes"]),
                n_channels=int(d["channels"]),
                sample_rate_hz=float(d["sample_rate_hz"]),
                participants=d["participants"],
                trials=d["trials"],
                labels=d.get("labels"),
                channel_subset=d.get("channel_subset"),
                file_channels=d.get("file_channels"),
                representation=d.get("representation", "raw"),
            )
        except KeyError as exc:
            raise DatasetError(f"manifest is missing field {exc.args[0]!r}") from None


@dataclass
class Dataset:
    """A validated dataset; recordings are read per participant on demand."""

    root: Path
    manifest: DatasetManifest
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def name(self) -> str:
        return self.manifest.name

    def path(self, participant, trial: int, label: int) -> Path:
        return self.root / f"p{participant}" / f"t{trial}" / f"m{label}.csv"

    def participant(self, pid) -> dict:
        """``{trial: {label: array (T, channels)}}`` for one participant."""
        pid = str(pid)
        if pid not in self.manifest.participants:
            raise DatasetError(f"participant {pid} is not listed in the manifest")
        if pid not in self._cache:
            return {t: {lab: self._read(pid, t, lab) for lab in self.manifest.labels}
                    for t in self.manifest.trials}
        return self._cache[pid]

    def _read(self, pid: str, trial: int, label: int) -> np.ndarray:
        path = self.path(pid, trial, label)
        where = f"participant {pid}, trial {trial}, motion {label}"
        if path.stat().st_size == 0:
            raise DatasetError(f"empty recording for {where} ({path})")
        try:
            arr = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
        except ValueError as exc:
            raise DatasetError(f"cannot parse {path} ({where}): {exc}") from None
        if arr.shape[0] == 0:
            raise DatasetError(f"empty recording for {where} ({path})")
        expected = self.manifest.expected_file_channels
        if expected is not None and arr.shape[1] != expected:
            raise DatasetError(
                f"{where}: file has {arr.shape[1]} channels, manifest expects {expected} ({path})"
            )
        if self.manifest.channel_subset is not None:
            if max(self.manifest.channel_subset) >= arr.shape[1]:
                raise DatasetError(f"{where}: channel_subset exceeds the {arr.shape[1]} file columns")
            arr = arr[:, self.manifest.channel_subset]
        if not np.all(np.isfinite(arr)):
            raise DatasetError(f"{where}: non-finite values in {path}")
        return arr

    def preload(self) -> None:
        for pid in self.manifest.participants:
            self._cache[pid] = self.participant(pid)


def load_dataset(root, lazy: bool = False) -> Dataset:
    """Read and validate a dataset directory.

    The layout is always checked. Unless ``lazy``, every recording is parsed
    and validated immediately; otherwise parsing happens per participant.
    """
    root = Path(root)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DatasetError(f"no {MANIFEST_NAME} in {root}")
    manifest = DatasetManifest.from_dict(json.loads(manifest_path.read_text()))
    ds = Dataset(root, manifest)
    for pid in manifest.participants:
        pdir = root / f"p{pid}"
        if not pdir.is_dir():
            raise DatasetError(f"participant directory {pdir} is missing")
        for t in manifest.trials:
            tdir = pdir / f"t{t}"
            if not tdir.is_dir():
                raise DatasetError(f"participant {pid}: trial {t} is missing ({tdir})")
            for lab in manifest.labels:
                if not ds.path(pid, t, lab).is_file():
                    raise DatasetError(f"participant {pid}, trial {t}: recording for motion {lab} is missing")
            for f in tdir.glob("m*.csv"):
                try:
                    lab = int(f.stem[1:])
                except ValueError:
                    continue
                if lab not in manifest.labels:
                    raise DatasetError(
                        f"participant {pid}, trial {t}: label {lab} outside 1..{manifest.n_classes} ({f})"
                    )
    if not lazy:
        ds.preload()
    return ds


def write_dataset(root, manifest: DatasetManifest, data: dict) -> Path:
    """Write ``data[participant][trial][label] -> (T, channels)`` arrays and the manifest."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for pid, trials in data.items():
        for t, recordings in trials.items():
            tdir = root / f"p{pid}" / f"t{t}"
            tdir.mkdir(parents=True, exist_ok=True)
            for lab, arr in recordings.items():
                arr = np.asarray(arr, dtype=float)
                np.savetxt(tdir / f"m{lab}.csv", arr.reshape(len(arr), -1), fmt="%.17g", delimiter=",")
    (root / MANIFEST_NAME).write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    return root

"""Smoothed-amplitude features from raw multi-channel EMG.

Each recording is full-wave rectified and passed through a causal
second-order Butterworth low-pass (bilinear transform with prewarping).
The filter runs independently on every channel of every recording, starting
from zero state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps


@dataclass(frozen=True)
class RawRecording:
    """Raw EMG, shape ``(channels, T)``."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if samples.ndim != 2 or samples.shape[1] < 1:
            raise ValueError(f"expected a (channels, T>=1) array, got shape {samples.shape}")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", samples)

    @property
    def channel_count(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class BiquadCoeffs:
    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    @property
    def b(self) -> np.ndarray:
        return np.array([self.b0, self.b1, self.b2])

    @property
    def a(self) -> np.ndarray:
        return np.array([1.0, self.a1, self.a2])

    def dc_gain(self) -> float:
        return math.fsum((self.b0, self.b1, self.b2)) / math.fsum((1.0, self.a1, self.a2))

    def poles(self) -> np.ndarray:
        return np.roots(self.a)

    def frequency_response(self, freq_hz, sample_rate_hz: float) -> np.ndarray:
        """Complex response H(e^{jw}) at the given frequencies."""
        z = np.exp(-2j * np.pi * np.asarray(freq_hz, dtype=float) / sample_rate_hz)
        return (self.b0 + self.b1 * z + self.b2 * z**2) / (1.0 + self.a1 * z + self.a2 * z**2)


@dataclass(frozen=True)
class FeatureSeries:
    """Feature patterns, shape ``(N, D)``, one row per kept time sample."""

    features: np.ndarray
    stride: int = 1


def rectify(recording: RawRecording) -> RawRecording:
    return RawRecording(np.abs(recording.samples), recording.sample_rate_hz)


def design_butterworth2_lowpass(cutoff_hz: float, sample_rate_hz: float) -> BiquadCoeffs:
    if not 0 < cutoff_hz < sample_rate_hz / 2:
        raise ValueError(
            f"cutoff must satisfy 0 < cutoff_hz < fs/2, got cutoff={cutoff_hz}, fs={sample_rate_hz}"
        )
    k = math.tan(math.pi * cutoff_hz / sample_rate_hz)
    k2 = k * k
    norm = 1.0 / (1.0 + math.sqrt(2.0) * k + k2)
    a1 = 2.0 * (k2 - 1.0) * norm
    a2 = (1.0 - math.sqrt(2.0) * k + k2) * norm
    # b0 = k2 * norm analytically; taking it from the exact sum of the rounded
    # denominator keeps unit DC gain even when 1 + a1 + a2 is tiny (fc << fs)
    b0 = math.fsum((1.0, a1, a2)) / 4.0
    return BiquadCoeffs(b0=b0, b1=2.0 * b0, b2=b0, a1=a1, a2=a2)


def filter_causal(x, coeffs: BiquadCoeffs, axis: int = -1) -> np.ndarray:
    """Apply the biquad along ``axis`` from zero initial state.

    ``scipy.signal.lfilter`` implements the transposed direct form II
    recursion, so it is used directly.
    """
    return sps.lfilter(coeffs.b, coeffs.a, np.asarray(x, dtype=float), axis=axis)


def transient_samples(cutoff_hz: float, sample_rate_hz: float) -> int:
    """Samples spanning five time constants of the low-pass, ceil(5 fs / (2 pi fc))."""
    return math.ceil(5.0 * sample_rate_hz / (2.0 * math.pi * cutoff_hz))


def extract_features(
    recording: RawRecording,
    cutoff_hz: float = 2.0,
    stride: int = 1,
    drop_transient: bool = False,
) -> FeatureSeries:
    """Rectify, low-pass every channel and keep every ``stride``-th sample.

    With ``drop_transient`` the first :func:`transient_samples` outputs are
    discarded before decimation.
    """
    stride = int(stride)
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    coeffs = design_butterworth2_lowpass(cutoff_hz, recording.sample_rate_hz)
    smoothed = filter_causal(rectify(recording).samples, coeffs, axis=1)
    start = transient_samples(cutoff_hz, recording.sample_rate_hz) if drop_transient else 0
    return FeatureSeries(np.ascontiguousarray(smoothed[:, start::stride].T), stride)


def zscore_fit(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column mean and standard deviation (zero std mapped to 1)."""
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return mean, std


def zscore_apply(features: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return (features - mean) / std

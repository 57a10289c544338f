"""Probabilistic EMG classifiers and their calibration (reliability diagrams, ECE, MCE)."""

__version__ = "0.1.0"

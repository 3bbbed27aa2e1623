"""Whole-based ECG to blood-pressure estimation: filtering, AMPD R-peak
detection, beat vectors, PCA, AdaBoost.R2 and BHS/AAMI evaluation."""

__version__ = "0.1.0"

from .errors import PulseGridError, ValidationError  # noqa: F401

"""Brick-wall FFT band filter, min-max normalisation and linear resampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadLength, DegenerateSignal, EmptySignal, NyquistViolation


@dataclass(frozen=True)
class BandSpec:
    lo_hz: float = 0.8
    hi_hz: float = 40.0

    def __post_init__(self):
        if not (self.lo_hz >= 0 and self.hi_hz > self.lo_hz):
            raise ValueError(f"invalid band [{self.lo_hz}, {self.hi_hz}] Hz")

    def check(self, fs: float) -> None:
        if self.hi_hz >= fs / 2:
            raise NyquistViolation(f"upper edge {self.hi_hz} Hz must lie below fs/2 = {fs / 2} Hz")


ECG_BAND = BandSpec(0.8, 40.0)


def bin_frequencies(n: int, fs: float) -> np.ndarray:
    """Absolute centre frequency of every full-FFT bin (k and n-k map to the same value)."""
    k = np.arange(n)
    return np.minimum(k, n - k) * fs / n


def band_mask(n: int, fs: float, band: BandSpec) -> np.ndarray:
    f = bin_frequencies(n, fs)
    # closed interval: a bin centred exactly on an edge is kept
    return (f >= band.lo_hz) & (f <= band.hi_hz)


def fft_bandpass(signal, fs: float, band: BandSpec = ECG_BAND) -> np.ndarray:
    """Zero every DFT bin outside ``band`` and transform back.

    The mask depends only on ``|f|`` so bins k and n-k are always zeroed
    together and the inverse transform is real up to rounding.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise EmptySignal("band filter needs at least two samples")
    if not np.isfinite(x).all():
        raise ValueError("signal contains non-finite samples")
    band.check(fs)
    spec = np.fft.fft(x)
    spec[~band_mask(x.size, fs, band)] = 0.0
    y = np.fft.ifft(spec)
    return y.real.copy()


def normalize(signal) -> np.ndarray:
    """Min-max scale onto [0, 1]."""
    x = np.asarray(signal, dtype=np.float64)
    if x.size < 2:
        raise EmptySignal("normalisation needs at least two samples")
    lo, hi = x.min(), x.max()
    if hi == lo:
        raise DegenerateSignal("constant signal cannot be normalised")
    y = (x - lo) / (hi - lo)
    # pin the extremes against rounding so both endpoints are attained exactly
    y[x == lo] = 0.0
    y[x == hi] = 1.0
    return y


def resample_linear(segment, target_len: int) -> np.ndarray:
    """Stretch ``segment`` onto ``target_len`` uniformly spaced points, endpoints kept."""
    x = np.asarray(segment, dtype=np.float64)
    if x.size < 2 or target_len < 2:
        raise BadLength(f"need n >= 2 and target_len >= 2, got n={x.size}, target_len={target_len}")
    if x.size == target_len:
        return x.copy()
    pos = np.linspace(0.0, x.size - 1, target_len)
    return np.interp(pos, np.arange(x.size), x)


def preprocess_ecg(ecg, fs: float, band: BandSpec = ECG_BAND) -> np.ndarray:
    """Band-limit then normalise one ECG window.

    A window with no in-band content beyond rounding residue (a flat line)
    raises DegenerateSignal instead of normalising the residue.
    """
    x = np.asarray(ecg, dtype=np.float64)
    y = fft_bandpass(x, fs, band)
    if np.ptp(y) <= 1e-9 * max(1.0, float(np.max(np.abs(x)))):
        raise DegenerateSignal("no in-band content in window")
    return normalize(y)

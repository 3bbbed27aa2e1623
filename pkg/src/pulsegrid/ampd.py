"""R-peak detection with the automatic multiscale-based peak detector (AMPD).

The detector builds a local-maxima scalogram over scales ``k = 1..L``, picks
the scale ``lam`` whose row holds the most local maxima, and keeps the samples
that are strict maxima at every scale up to ``lam``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SignalTooShort, TooFewPeaks

MIN_LENGTH = 8
MAX_RR_S = 1.2


@dataclass(frozen=True, eq=False)
class PeakSet:
    indices: np.ndarray
    scale_lambda: int

    def __len__(self):
        return self.indices.size

    def __eq__(self, other):
        if not isinstance(other, PeakSet):
            return NotImplemented
        return self.scale_lambda == other.scale_lambda and np.array_equal(self.indices, other.indices)


def detrend(x: np.ndarray) -> np.ndarray:
    """Remove the least-squares straight line."""
    t = np.arange(x.size, dtype=np.float64)
    t -= t.mean()
    slope = np.dot(t, x - x.mean()) / np.dot(t, t)
    return x - x.mean() - slope * t


def scale_count(n: int, fs: float | None = None) -> int:
    """Number of scalogram rows: ceil(N/2) - 1, capped at 1.2 s of samples when fs is known."""
    rows = math.ceil(n / 2) - 1
    if fs is not None:
        rows = min(rows, math.ceil(MAX_RR_S * fs))
    return max(rows, 1)


def local_maxima_rows(x: np.ndarray, rows: int) -> np.ndarray:
    """Boolean ``rows x N`` matrix: entry [k-1, i] is True if x[i] is a strict max at distance k."""
    n = x.size
    out = np.zeros((rows, n), dtype=bool)
    for k in range(1, rows + 1):
        centre = x[k : n - k]
        out[k - 1, k : n - k] = (centre > x[: n - 2 * k]) & (centre > x[2 * k :])
    return out


def detect_peaks(
    signal,
    fs: float | None = None,
    deterministic: bool = True,
    seed: int | None = None,
) -> PeakSet:
    """Locate peaks of a (quasi-)periodic signal.

    Parameters
    ----------
    signal : array_like
        At least 8 finite samples.
    fs : float, optional
        Sampling rate. When given, the scale search is limited to 1.2 s.
    deterministic : bool
        Use the constant 0.5 in place of the uniform random offset of
        non-maxima; otherwise draw offsets from ``seed``.

    Returns
    -------
    PeakSet
        Ascending interior indices and the selected scale.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size < MIN_LENGTH:
        raise SignalTooShort(f"AMPD needs at least {MIN_LENGTH} samples")
    if not np.isfinite(x).all():
        raise ValueError("signal contains non-finite samples")
    n = x.size
    x = detrend(x)
    rows = scale_count(n, fs)
    is_max = local_maxima_rows(x, rows)

    if deterministic:
        gamma = 1.5 * (n - is_max.sum(axis=1))
    else:
        rng = np.random.default_rng(seed)
        lms = 1.0 + rng.random((rows, n))
        lms[is_max] = 0.0
        gamma = lms.sum(axis=1)
    # argmin returns the first minimum, i.e. the finest scale on ties
    lam = int(np.argmin(gamma)) + 1
    peaks = np.flatnonzero(is_max[:lam].all(axis=0))
    return PeakSet(peaks, lam)


def rr_intervals(peaks, fs: float) -> list[tuple[float, int, int]]:
    """``(duration_s, start_idx, end_idx)`` for every consecutive peak pair."""
    idx = np.asarray(getattr(peaks, "indices", peaks), dtype=np.int64)
    if idx.size < 2:
        raise TooFewPeaks("need at least two peaks for an RR interval")
    return [((int(b) - int(a)) / fs, int(a), int(b)) for a, b in zip(idx[:-1], idx[1:])]

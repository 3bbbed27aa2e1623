"""Whole-based beat vectors: the ECG samples between consecutive R peaks,
stretched to a fixed length, labelled with the pressures of their window."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import ampd, dsp
from .errors import DegenerateSignal, EmptyDataset, MalformedRecord, NoValidBeats
from .signalio import BpLabels, SegmentRecord, WaveformRecord, check_regularity, segment

DEFAULT_LENGTH = 625
RR_MIN_S = 0.4
RR_MAX_S = 1.2
TARGETS = ("dbp", "map", "sbp")


@dataclass(frozen=True, eq=False)
class BeatVector:
    values: np.ndarray
    subject_id: str
    labels: BpLabels
    rr_s: float
    window_index: int = 0


@dataclass(eq=False)
class Dataset:
    """Row-aligned feature matrix, label vectors and subject index."""

    X: np.ndarray
    dbp: np.ndarray
    map: np.ndarray
    sbp: np.ndarray
    subjects: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        n = self.X.shape[0]
        for name in TARGETS:
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != (n,):
                raise ValueError(f"label vector {name} has shape {v.shape}, expected ({n},)")
            setattr(self, name, v)
        self.subjects = np.asarray(self.subjects, dtype=object)
        if self.subjects.shape != (n,):
            raise ValueError("subject index must have one entry per row")

    def __len__(self):
        return self.X.shape[0]

    def target(self, name: str) -> np.ndarray:
        if name not in TARGETS:
            raise KeyError(name)
        return getattr(self, name)

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.X[rows], self.dbp[rows], self.map[rows], self.sbp[rows], self.subjects[rows])

    def record_keys(self) -> np.ndarray:
        """One key per 15 s window: rows of a window share subject and all three labels."""
        keys = [f"{s}|{d!r}|{m!r}|{b!r}" for s, d, m, b in zip(self.subjects, self.dbp, self.map, self.sbp)]
        return np.asarray(keys, dtype=object)


def preprocess_segment(seg: SegmentRecord, band: dsp.BandSpec = dsp.ECG_BAND) -> SegmentRecord:
    return dataclasses.replace(seg, ecg_window=dsp.preprocess_ecg(seg.ecg_window, seg.fs, band))


def extract_beats(seg: SegmentRecord, peaks, L: int = DEFAULT_LENGTH) -> list[BeatVector]:
    """Resample every in-range RR interval of a preprocessed segment to ``L`` samples.

    Intervals shorter than 0.4 s or longer than 1.2 s are skipped.
    """
    idx = np.asarray(getattr(peaks, "indices", peaks), dtype=np.int64)
    out = []
    for a, b in zip(idx[:-1], idx[1:]):
        rr = (b - a) / seg.fs
        if not (RR_MIN_S <= rr <= RR_MAX_S):
            continue
        values = dsp.resample_linear(seg.ecg_window[a:b], L)
        out.append(BeatVector(values, seg.subject_id, seg.labels, float(rr), seg.window_index))
    if not out:
        raise NoValidBeats(
            f"{seg.subject_id} window {seg.window_index}: no RR interval in [{RR_MIN_S}, {RR_MAX_S}] s"
        )
    return out


def segment_beats(
    seg: SegmentRecord,
    L: int = DEFAULT_LENGTH,
    band: dsp.BandSpec = dsp.ECG_BAND,
    regularity_tolerance: float | None = None,
) -> list[BeatVector]:
    """Filter, normalise, detect R peaks and extract beats for one raw window.

    With ``regularity_tolerance`` set, an irregular window yields no beats.
    """
    try:
        pre = preprocess_segment(seg, band)
    except DegenerateSignal:
        return []
    peaks = ampd.detect_peaks(pre.ecg_window, fs=seg.fs)
    if regularity_tolerance is not None and not check_regularity(peaks, seg.fs, regularity_tolerance):
        return []
    try:
        return extract_beats(pre, peaks, L)
    except NoValidBeats:
        return []


def dataset_from_beats(beats: Sequence[BeatVector]) -> Dataset:
    if not beats:
        raise EmptyDataset("no valid beats in any segment")
    return Dataset(
        np.vstack([b.values for b in beats]),
        [b.labels.dbp for b in beats],
        [b.labels.map for b in beats],
        [b.labels.sbp for b in beats],
        [b.subject_id for b in beats],
    )


def assemble_dataset(
    segments: Iterable[SegmentRecord],
    L: int = DEFAULT_LENGTH,
    band: dsp.BandSpec = dsp.ECG_BAND,
    regularity_tolerance: float | None = None,
) -> Dataset:
    """Rows in segment order, then beat order, so assembly is deterministic."""
    beats: list[BeatVector] = []
    for seg in segments:
        beats.extend(segment_beats(seg, L, band, regularity_tolerance))
    return dataset_from_beats(beats)


def build_dataset(
    records: Iterable[WaveformRecord],
    count: int = 3,
    L: int = DEFAULT_LENGTH,
    band: dsp.BandSpec = dsp.ECG_BAND,
    regularity_tolerance: float | None = 0.20,
) -> Dataset:
    segs = [s for rec in records for s in segment(rec, count)]
    return assemble_dataset(segs, L, band, regularity_tolerance)


# ---------------------------------------------------------------------------
# dataset file: header n_rows,n_cols then rows "x_1,...,x_L,dbp,map,sbp,subject"


def format_dataset(ds: Dataset) -> str:
    n, L = ds.X.shape
    lines = [f"{n},{L}"]
    for i in range(n):
        feats = ",".join(repr(v) for v in ds.X[i].tolist())
        lines.append(f"{feats},{float(ds.dbp[i])!r},{float(ds.map[i])!r},{float(ds.sbp[i])!r},{ds.subjects[i]}")
    return "\n".join(lines) + "\n"


def write_dataset(ds: Dataset, path) -> None:
    Path(path).write_text(format_dataset(ds))


def read_dataset(path) -> Dataset:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise MalformedRecord(f"{path}: empty dataset file")
    try:
        n, L = (int(v) for v in lines[0].split(","))
    except ValueError as exc:
        raise MalformedRecord(f"{path}: bad header {lines[0]!r}") from exc
    if len(lines) - 1 != n:
        raise MalformedRecord(f"{path}: header declares {n} rows, found {len(lines) - 1}")
    X = np.empty((n, L))
    labels = np.empty((n, 3))
    subjects = []
    for i, line in enumerate(lines[1:]):
        f = line.split(",")
        if len(f) != L + 4:
            raise MalformedRecord(f"{path}:{i + 2}: expected {L + 4} fields, found {len(f)}")
        try:
            X[i] = np.asarray(f[:L], dtype=np.float64)
            labels[i] = np.asarray(f[L : L + 3], dtype=np.float64)
        except ValueError as exc:
            raise MalformedRecord(f"{path}:{i + 2}: {exc}") from exc
        subjects.append(f[L + 3])
    if n == 0:
        raise EmptyDataset(f"{path}: no rows")
    return Dataset(X, labels[:, 0], labels[:, 1], labels[:, 2], subjects)

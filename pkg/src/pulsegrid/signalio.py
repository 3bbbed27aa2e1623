"""Paired ECG/ABP records: on-disk format, validation, windowing and labels.

Text record format (``*.rec``): one or more subject blocks, each a header line
``subject_id,fs,n_samples`` followed by ``n_samples`` lines ``ecg,abp``.

Binary record format (``*.pgrd``): a 16-byte little-endian header (magic
``PGRD``, u32 fs, u64 n) followed by ``n`` interleaved ``(ecg, abp)`` float64
pairs. The subject id is the file stem.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ImplausibleLabel, MalformedRecord, TooShort, UnsupportedRate

SEGMENT_SECONDS = 15
DEFAULT_FS = 125
DBP_FLOOR = 30.0
SBP_CEILING = 300.0
TEXT_SUFFIX = ".rec"
BINARY_SUFFIX = ".pgrd"
MAGIC = b"PGRD"
_HEADER = struct.Struct("<4sIQ")


@dataclass(frozen=True)
class BpLabels:
    dbp: float
    sbp: float
    map: float

    @classmethod
    def from_extremes(cls, dbp: float, sbp: float) -> "BpLabels":
        return cls(float(dbp), float(sbp), mean_arterial_pressure(dbp, sbp))


@dataclass(frozen=True, eq=False)
class WaveformRecord:
    subject_id: str
    fs: int
    ecg: np.ndarray
    abp: np.ndarray

    def __post_init__(self):
        ecg = np.asarray(self.ecg, dtype=np.float64)
        abp = np.asarray(self.abp, dtype=np.float64)
        _validate_channels(self.subject_id, self.fs, ecg, abp)
        ecg.setflags(write=False)
        abp.setflags(write=False)
        object.__setattr__(self, "ecg", ecg)
        object.__setattr__(self, "abp", abp)

    def __len__(self):
        return self.ecg.size

    @property
    def duration_s(self) -> float:
        return self.ecg.size / self.fs


@dataclass(frozen=True, eq=False)
class SegmentRecord:
    subject_id: str
    fs: int
    window_index: int
    ecg_window: np.ndarray
    abp_window: np.ndarray
    labels: BpLabels

    @property
    def start(self) -> int:
        return self.window_index * SEGMENT_SECONDS * self.fs


def mean_arterial_pressure(dbp: float, sbp: float) -> float:
    return (2.0 * float(dbp) + float(sbp)) / 3.0


def _validate_channels(subject_id, fs, ecg, abp):
    if isinstance(fs, bool) or int(fs) != fs or fs <= 0:
        raise UnsupportedRate(f"{subject_id}: sampling rate must be a positive integer, got {fs!r}")
    if ecg.ndim != 1 or abp.ndim != 1:
        raise MalformedRecord(f"{subject_id}: channels must be one-dimensional")
    if ecg.size != abp.size:
        raise MalformedRecord(
            f"{subject_id}: channel length mismatch (ecg {ecg.size}, abp {abp.size})"
        )
    if ecg.size == 0:
        raise MalformedRecord(f"{subject_id}: empty record")
    if not (np.isfinite(ecg).all() and np.isfinite(abp).all()):
        raise MalformedRecord(f"{subject_id}: non-finite sample")


# ---------------------------------------------------------------------------
# reading


def load_records(path) -> list[WaveformRecord]:
    """Load every record under ``path`` (a record file or a dataset directory).

    Directories are scanned for ``*.rec`` and ``*.pgrd`` files in name order.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(
            p for p in path.iterdir() if p.suffix in (TEXT_SUFFIX, BINARY_SUFFIX) and p.is_file()
        )
    elif path.is_file():
        files = [path]
    else:
        raise FileNotFoundError(path)
    records: list[WaveformRecord] = []
    for f in files:
        if f.suffix == BINARY_SUFFIX:
            records.append(read_binary(f))
        else:
            records.extend(read_text(f))
    return records


def read_text(path) -> list[WaveformRecord]:
    path = Path(path)
    lines = path.read_text().splitlines()
    records = []
    pos = 0
    while pos < len(lines):
        line = lines[pos].strip()
        if not line:
            pos += 1
            continue
        header = line.split(",")
        if len(header) != 3:
            raise MalformedRecord(f"{path}:{pos + 1}: expected header subject_id,fs,n_samples")
        sid = header[0].strip()
        try:
            fs = int(header[1])
            n = int(header[2])
        except ValueError as exc:
            raise MalformedRecord(f"{path}:{pos + 1}: bad header {line!r}") from exc
        if fs <= 0:
            raise UnsupportedRate(f"{path}:{pos + 1}: fs must be positive, got {fs}")
        body = lines[pos + 1 : pos + 1 + n]
        if len(body) != n:
            raise MalformedRecord(f"{path}: subject {sid} declares {n} samples, found {len(body)}")
        data = np.empty((n, 2))
        for j, row in enumerate(body):
            fields = row.split(",")
            if len(fields) != 2:
                raise MalformedRecord(
                    f"{path}:{pos + 2 + j}: expected 'ecg,abp', got {row!r} (missing channel?)"
                )
            try:
                data[j, 0] = float(fields[0])
                data[j, 1] = float(fields[1])
            except ValueError as exc:
                raise MalformedRecord(f"{path}:{pos + 2 + j}: {exc}") from exc
        records.append(WaveformRecord(sid, fs, data[:, 0], data[:, 1]))
        pos += 1 + n
    return records


def read_binary(path) -> WaveformRecord:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise MalformedRecord(f"{path}: truncated header")
    magic, fs, n = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise MalformedRecord(f"{path}: bad magic {magic!r}")
    if fs == 0:
        raise UnsupportedRate(f"{path}: fs must be positive")
    expected = _HEADER.size + 16 * n
    if len(raw) != expected:
        raise MalformedRecord(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n, 2)
    return WaveformRecord(path.stem, int(fs), data[:, 0].copy(), data[:, 1].copy())


# ---------------------------------------------------------------------------
# writing


def format_text(record: WaveformRecord) -> str:
    # repr() gives the shortest string that round-trips a float64 exactly
    out = [f"{record.subject_id},{record.fs},{record.ecg.size}"]
    out.extend(f"{e!r},{a!r}" for e, a in zip(record.ecg.tolist(), record.abp.tolist()))
    return "\n".join(out) + "\n"


def encode_binary(record: WaveformRecord) -> bytes:
    inter = np.empty((record.ecg.size, 2), dtype="<f8")
    inter[:, 0] = record.ecg
    inter[:, 1] = record.abp
    return _HEADER.pack(MAGIC, record.fs, record.ecg.size) + inter.tobytes()


def write_record_files(records: Iterable[WaveformRecord], directory, fmt: str = "text") -> list[Path]:
    """Write one file per record into ``directory``; returns the written paths."""
    if fmt not in ("text", "binary"):
        raise ValueError(f"unknown record format {fmt!r}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for rec in records:
        if "," in rec.subject_id or "\n" in rec.subject_id or "/" in rec.subject_id:
            raise MalformedRecord(f"subject id {rec.subject_id!r} cannot be stored")
        if fmt == "text":
            p = directory / f"{rec.subject_id}{TEXT_SUFFIX}"
            p.write_text(format_text(rec))
        else:
            p = directory / f"{rec.subject_id}{BINARY_SUFFIX}"
            p.write_bytes(encode_binary(rec))
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# windows and labels


def derive_labels(abp_window, fs: int) -> BpLabels:
    """DBP/SBP are the window minimum/maximum; MAP = (2 DBP + SBP) / 3."""
    abp = np.asarray(abp_window, dtype=np.float64)
    if abp.size != SEGMENT_SECONDS * fs:
        raise MalformedRecord(
            f"label window must hold {SEGMENT_SECONDS * fs} samples, got {abp.size}"
        )
    if not np.isfinite(abp).all():
        raise MalformedRecord("non-finite sample in ABP window")
    dbp = float(abp.min())
    sbp = float(abp.max())
    if dbp >= sbp:
        raise ImplausibleLabel(f"DBP {dbp:.2f} >= SBP {sbp:.2f}")
    if dbp < DBP_FLOOR or sbp > SBP_CEILING:
        raise ImplausibleLabel(
            f"labels outside [{DBP_FLOOR:g}, {SBP_CEILING:g}] mmHg: DBP {dbp:.2f}, SBP {sbp:.2f}"
        )
    return BpLabels.from_extremes(dbp, sbp)


def segment(record: WaveformRecord, count: int = 3) -> list[SegmentRecord]:
    """Cut ``count`` consecutive, non-overlapping 15 s windows starting at sample 0."""
    if count < 1:
        raise ValueError("count must be positive")
    width = SEGMENT_SECONDS * record.fs
    if len(record) < count * width:
        raise TooShort(
            f"{record.subject_id}: {len(record)} samples cannot supply {count} windows of {width}"
        )
    out = []
    for w in range(count):
        sl = slice(w * width, (w + 1) * width)
        abp = record.abp[sl]
        out.append(
            SegmentRecord(
                record.subject_id, record.fs, w, record.ecg[sl], abp, derive_labels(abp, record.fs)
            )
        )
    return out


def check_regularity(peaks, fs: int, tolerance: float = 0.20) -> bool:
    """True when every RR interval is within ``tolerance`` of the median RR.

    Fewer than three peaks give no evidence of a regular rhythm and return False.
    """
    idx = np.asarray(getattr(peaks, "indices", peaks), dtype=np.float64)
    if idx.size < 3:
        return False
    rr = np.diff(idx) / fs
    med = float(np.median(rr))
    if med <= 0:
        return False
    return bool(np.max(np.abs(rr - med)) <= tolerance * med)


"""Synthetic paired ECG/ABP corpus with planted ground truth.

Each ECG beat is a sum of five Gaussian bumps (P, Q, R, S, T) centred on the
R-peak grid. Window-level DBP/SBP are a fixed smooth function of the
subject's R amplitude, QRS width and the window heart rate, so the learning
problem is realisable from ECG morphology alone. The ABP trace is a
normalised pulse per beat scaled between the planted DBP and SBP of the
window each sample falls in, plus bounded uniform noise.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import InvalidConfig, IoFailure
from .signalio import SEGMENT_SECONDS, WaveformRecord, mean_arterial_pressure, write_record_files

DBP_RANGE = (50.0, 116.0)
SBP_RANGE = (74.0, 200.0)
GROUND_TRUTH_FILE = "ground_truth.txt"

R_AMP_RANGE = (0.7, 1.5)
QRS_WIDTH_RANGE = (0.012, 0.018)
P_OFFSET, P_WIDTH = -0.16, 0.025
T_OFFSET = 0.32


@dataclass(frozen=True)
class BpCoupling:
    """Planted map from (R amplitude, QRS width, HR) to DBP and pulse pressure."""

    dbp_base: float = 72.0
    dbp_amp: float = 12.0
    dbp_hr: float = 6.0
    dbp_width: float = -4.0
    dbp_cross: float = 3.0
    pp_base: float = 52.0
    pp_amp: float = 16.0
    pp_width: float = 8.0
    pp_hr: float = -5.0
    pp_cross: float = 4.0

    def __call__(self, r_amp: float, qrs_width: float, hr: float) -> tuple[float, float]:
        zr = (r_amp - 1.1) / 0.4
        zw = (qrs_width - 0.015) / 0.003
        zh = (hr - 96.5) / 46.5
        sat = math.tanh(1.2 * zr)
        dbp = self.dbp_base + self.dbp_amp * sat + self.dbp_hr * zh + self.dbp_width * zw
        dbp += self.dbp_cross * zr * zh
        pp = self.pp_base + self.pp_amp * sat + self.pp_width * zw + self.pp_hr * zh
        pp += self.pp_cross * zr * zw
        dbp = min(max(dbp, DBP_RANGE[0]), DBP_RANGE[1])
        sbp = min(max(dbp + pp, SBP_RANGE[0], dbp + 20.0), SBP_RANGE[1])
        return dbp, sbp


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 40
    fs: int = 125
    hr_range: tuple[float, float] = (50.0, 143.0)
    snr_db: float = 20.0
    bp_coupling: BpCoupling = field(default_factory=BpCoupling)
    af_mode: bool = False
    seed: int = 0
    n_windows: int = 3
    abp_noise: float = 0.3
    hr_drift: float = 4.0
    baseline_wander: float = 0.1
    fixed_hr: float | None = None

    def validate(self) -> None:
        lo, hi = self.hr_range
        if self.n_subjects < 1 or self.n_windows < 1:
            raise InvalidConfig("n_subjects and n_windows must be positive")
        if self.fs <= 0:
            raise InvalidConfig("fs must be positive")
        if not (30 <= lo <= hi <= 220):
            raise InvalidConfig(f"hr_range {self.hr_range} must lie inside [30, 220] bpm")
        if self.fixed_hr is not None and not (30 <= self.fixed_hr <= 220):
            raise InvalidConfig("fixed_hr must lie inside [30, 220] bpm")
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise InvalidConfig("snr_db must be a number or +inf (noiseless)")
        if not (0 <= self.abp_noise <= 0.5):
            raise InvalidConfig("abp_noise must lie in [0, 0.5] mmHg")
        if self.hr_drift < 0 or self.baseline_wander < 0:
            raise InvalidConfig("hr_drift and baseline_wander must be non-negative")


@dataclass(frozen=True)
class SubjectParams:
    hr: float
    r_amp: float
    qrs_width: float
    p_amp: float
    q_amp: float
    s_amp: float
    t_amp: float
    t_width: float
    wander_hz: float
    wander_phase: float


@dataclass(frozen=True)
class WindowTruth:
    subject_id: str
    window_idx: int
    hr: float
    dbp: float
    sbp: float

    @property
    def map(self) -> float:
        return mean_arterial_pressure(self.dbp, self.sbp)


@dataclass
class GroundTruth:
    windows: list[WindowTruth] = field(default_factory=list)
    peaks: dict[str, np.ndarray] = field(default_factory=dict)
    params: dict[str, SubjectParams] = field(default_factory=dict)

    def window_labels(self, subject_id: str) -> list[WindowTruth]:
        return [w for w in self.windows if w.subject_id == subject_id]


def _draw_subject(rng: np.random.Generator, cfg: SynthConfig) -> SubjectParams:
    lo, hi = cfg.hr_range
    margin = min(cfg.hr_drift, (hi - lo) / 2)
    hr = cfg.fixed_hr if cfg.fixed_hr is not None else rng.uniform(lo + margin, hi - margin)
    return SubjectParams(
        hr=float(hr),
        r_amp=float(rng.uniform(*R_AMP_RANGE)),
        qrs_width=float(rng.uniform(*QRS_WIDTH_RANGE)),
        p_amp=float(rng.uniform(0.10, 0.14)),
        q_amp=float(rng.uniform(0.08, 0.12)),
        s_amp=float(rng.uniform(0.22, 0.28)),
        t_amp=float(rng.uniform(0.25, 0.32)),
        t_width=float(rng.uniform(0.07, 0.09)),
        wander_hz=float(rng.uniform(0.1, 0.3)),
        wander_phase=float(rng.uniform(0, 2 * np.pi)),
    )


def _r_grid(rng, cfg: SynthConfig, window_hr: np.ndarray, n: int) -> np.ndarray:
    """R-peak sample indices; spacing follows the HR of the window each beat starts in."""
    fs = cfg.fs
    width = SEGMENT_SECONDS * fs
    rr0 = 60.0 / window_hr[0] * fs
    t = rng.uniform(0.4, 0.6) * rr0
    peaks = []
    while t < n:
        peaks.append(int(round(t)))
        w = min(int(t) // width, window_hr.size - 1)
        rr = 60.0 / window_hr[w]
        if cfg.af_mode:
            rr = float(np.clip(rr * math.exp(rng.normal(0.0, 0.25)), 0.3, 2.0))
        t += rr * fs
    return np.unique(np.asarray(peaks, dtype=np.int64))


def _ecg(p: SubjectParams, peaks: np.ndarray, n: int, fs: int) -> np.ndarray:
    t = np.arange(n) / fs
    x = np.zeros(n)
    rr = np.diff(peaks) / fs
    rr = np.concatenate([rr[:1], rr]) if rr.size else np.array([1.0])
    reach = int(0.8 * fs)
    for j, r in enumerate(peaks):
        # wave offsets in seconds relative to R; T scales with sqrt(RR) (QT shortening at high HR)
        sq = math.sqrt(rr[min(j + 1, rr.size - 1)])
        bumps = (
            (p.p_amp, P_OFFSET, P_WIDTH),
            (-p.q_amp, -0.025, 0.008),
            (p.r_amp, 0.0, p.qrs_width),
            (-p.s_amp, 0.03, 0.010),
            (p.t_amp, T_OFFSET * sq, p.t_width * sq),
        )
        lo, hi = max(r - reach, 0), min(r + reach, n)
        s = t[lo:hi] - r / fs
        for amp, centre, width in bumps:
            x[lo:hi] += amp * np.exp(-0.5 * ((s - centre) / width) ** 2)
    return x


def _pulse_shape(m: int) -> np.ndarray:
    """One beat of normalised arterial pulse over m samples: exactly 0 at its minimum, 1 at its maximum."""
    phi = np.arange(m) / m
    raw = np.exp(-0.5 * ((phi - 0.3) / 0.09) ** 2) + 0.3 * np.exp(-0.5 * ((phi - 0.55) / 0.07) ** 2)
    raw = raw - raw.min()
    return raw / raw.max()


def _abp(rng, cfg: SynthConfig, peaks, windows: list[WindowTruth], n: int) -> np.ndarray:
    g = np.zeros(n)
    bounds = np.concatenate([peaks, [n]])
    if bounds[0] > 0:
        bounds = np.concatenate([[0], bounds])
    for a, b in zip(bounds[:-1], bounds[1:]):
        if b - a < 2:
            continue
        if cfg.af_mode and rng.random() < 0.15:
            continue  # pulse deficit: electrical beat without a pressure pulse
        g[a:b] = _pulse_shape(b - a)
    width = SEGMENT_SECONDS * cfg.fs
    dbp = np.empty(n)
    sbp = np.empty(n)
    for w in windows:
        sl = slice(w.window_idx * width, (w.window_idx + 1) * width)
        dbp[sl] = w.dbp
        sbp[sl] = w.sbp
    abp = dbp + (sbp - dbp) * g
    if cfg.abp_noise > 0:
        abp += rng.uniform(-cfg.abp_noise, cfg.abp_noise, n)
    return abp


def generate_subject(cfg: SynthConfig, index: int, rng: np.random.Generator):
    sid = f"s{index:03d}"
    p = _draw_subject(rng, cfg)
    lo, hi = cfg.hr_range
    drift = rng.uniform(-cfg.hr_drift, cfg.hr_drift, cfg.n_windows)
    window_hr = np.clip(p.hr + drift, lo, hi)
    if cfg.fixed_hr is not None:
        window_hr[:] = cfg.fixed_hr
    windows = []
    for w, hr in enumerate(window_hr):
        dbp, sbp = cfg.bp_coupling(p.r_amp, p.qrs_width, float(hr))
        windows.append(WindowTruth(sid, w, float(hr), dbp, sbp))

    n = cfg.n_windows * SEGMENT_SECONDS * cfg.fs
    peaks = _r_grid(rng, cfg, window_hr, n)
    ecg = _ecg(p, peaks, n, cfg.fs)
    if math.isfinite(cfg.snr_db):
        sigma = math.sqrt(np.mean(ecg**2) / 10 ** (cfg.snr_db / 10))
        ecg = ecg + rng.normal(0.0, sigma, n)
    if cfg.baseline_wander > 0:
        t = np.arange(n) / cfg.fs
        ecg = ecg + cfg.baseline_wander * np.sin(2 * np.pi * p.wander_hz * t + p.wander_phase)
    abp = _abp(rng, cfg, peaks, windows, n)
    return WaveformRecord(sid, cfg.fs, ecg, abp), windows, peaks, p


def generate(config: SynthConfig) -> tuple[list[WaveformRecord], GroundTruth]:
    """Generate ``config.n_subjects`` records; a pure function of the config (seed included)."""
    config.validate()
    children = np.random.SeedSequence(config.seed).spawn(config.n_subjects)
    records = []
    truth = GroundTruth()
    for i, ss in enumerate(children):
        rec, windows, peaks, params = generate_subject(config, i, np.random.default_rng(ss))
        records.append(rec)
        truth.windows.extend(windows)
        truth.peaks[rec.subject_id] = peaks
        truth.params[rec.subject_id] = params
    return records, truth


# ---------------------------------------------------------------------------
# sidecar


def format_ground_truth(truth: GroundTruth) -> str:
    lines = ["# windows", "subject_id,window_idx,dbp,sbp,map"]
    lines += [f"{w.subject_id},{w.window_idx},{w.dbp!r},{w.sbp!r},{w.map!r}" for w in truth.windows]
    lines += ["# peaks", "subject_id,peak_idx"]
    for sid, idx in truth.peaks.items():
        lines += [f"{sid},{int(i)}" for i in idx]
    names = [f.name for f in fields(SubjectParams)]
    lines += ["# subjects", "subject_id," + ",".join(names)]
    for sid, p in truth.params.items():
        d = asdict(p)
        lines.append(sid + "," + ",".join(repr(d[k]) for k in names))
    return "\n".join(lines) + "\n"


def parse_ground_truth(text: str) -> GroundTruth:
    truth = GroundTruth()
    section = None
    peaks: dict[str, list[int]] = {}
    header_next = False
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("# "):
            section = line[2:].strip()
            header_next = True
            continue
        if header_next:
            header_next = False
            continue
        f = line.split(",")
        if section == "windows":
            dbp, sbp = float(f[2]), float(f[3])
            # hr is not stored in the sidecar
            truth.windows.append(WindowTruth(f[0], int(f[1]), float("nan"), dbp, sbp))
        elif section == "peaks":
            peaks.setdefault(f[0], []).append(int(f[1]))
        elif section == "subjects":
            truth.params[f[0]] = SubjectParams(*map(float, f[1:]))
    truth.peaks = {k: np.asarray(v, dtype=np.int64) for k, v in peaks.items()}
    return truth


def write_records(records, ground_truth: GroundTruth, path, fmt: str = "text") -> list[Path]:
    """Write records in the signalio format plus the ``ground_truth.txt`` sidecar."""
    path = Path(path)
    try:
        written = write_record_files(records, path, fmt)
        side = path / GROUND_TRUTH_FILE
        side.write_text(format_ground_truth(ground_truth))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return written + [side]


def read_ground_truth(path) -> GroundTruth:
    path = Path(path)
    if path.is_dir():
        path = path / GROUND_TRUTH_FILE
    return parse_ground_truth(path.read_text())

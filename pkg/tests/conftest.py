import numpy as np
import pytest

from pulsegrid import signalio, synth

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(label: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def planted_in_window(truth, subject_id, window, fs=125):
    width = signalio.SEGMENT_SECONDS * fs
    p = truth.peaks[subject_id]
    p = p[(p >= window * width) & (p < (window + 1) * width)]
    return p - window * width


def match_peaks(planted, found, tol=1):
    """Count planted peaks with a detection within ``tol`` samples, and unmatched detections."""
    found = np.asarray(found)
    hit = sum(bool(found.size) and np.min(np.abs(found - p)) <= tol for p in planted)
    spurious = sum(not planted.size or np.min(np.abs(planted - f)) > tol for f in found)
    return hit, spurious


@pytest.fixture(scope="session")
def small_corpus():
    return synth.generate(synth.SynthConfig(n_subjects=12, seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

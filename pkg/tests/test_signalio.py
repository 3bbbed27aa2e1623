import numpy as np
import pytest

from pulsegrid import signalio, synth
from pulsegrid.errors import ImplausibleLabel, MalformedRecord, TooShort, UnsupportedRate
from pulsegrid.signalio import BpLabels, WaveformRecord


def make_record(sid="a", seconds=45, fs=125, seed=0):
    rng = np.random.default_rng(seed)
    n = seconds * fs
    abp = 80 + 40 * rng.random(n)
    return WaveformRecord(sid, fs, rng.normal(size=n), abp)


def test_two_subjects_text_file_round_trip(tmp_path):
    a, b = make_record("p1", 15), make_record("p2", 15, seed=1)
    f = tmp_path / "two.rec"
    f.write_text(signalio.format_text(a) + signalio.format_text(b))
    recs = signalio.load_records(f)
    assert [r.subject_id for r in recs] == ["p1", "p2"]
    assert all(len(r) == 1875 for r in recs)
    assert np.array_equal(recs[0].ecg, a.ecg) and np.array_equal(recs[1].abp, b.abp)


@pytest.mark.parametrize("fmt", ["text", "binary"])
def test_directory_round_trip_is_bit_identical(tmp_path, fmt):
    recs, _ = synth.generate(synth.SynthConfig(n_subjects=3, seed=2))
    signalio.write_record_files(recs, tmp_path, fmt)
    back = signalio.load_records(tmp_path)
    assert [r.subject_id for r in back] == [r.subject_id for r in recs]
    for r, s in zip(recs, back):
        assert r.fs == s.fs
        assert np.array_equal(r.ecg, s.ecg) and np.array_equal(r.abp, s.abp)


def test_binary_layout(tmp_path):
    rec = WaveformRecord("x", 125, [1.0, 2.0], [3.0, 4.0])
    raw = signalio.encode_binary(rec)
    assert raw[:4] == b"PGRD" and len(raw) == 16 + 32
    assert np.array_equal(np.frombuffer(raw[16:], "<f8"), [1.0, 3.0, 2.0, 4.0])


def test_nan_in_abp_is_malformed(tmp_path):
    f = tmp_path / "bad.rec"
    f.write_text("s,125,3\n0.1,80\n0.2,nan\n0.3,90\n")
    with pytest.raises(MalformedRecord):
        signalio.load_records(f)


@pytest.mark.parametrize(
    "body",
    [
        "s,125,3\n0.1,80\n0.2\n0.3,90\n",  # missing channel
        "s,125,4\n0.1,80\n0.2,85\n0.3,90\n",  # length mismatch with header
        "s,125\n0.1,80\n",  # bad header
        "s,125,1\nabc,80\n",  # not a number
    ],
)
def test_malformed_text(tmp_path, body):
    f = tmp_path / "bad.rec"
    f.write_text(body)
    with pytest.raises(MalformedRecord):
        signalio.load_records(f)


def test_unsupported_rate(tmp_path):
    f = tmp_path / "bad.rec"
    f.write_text("s,0,1\n0.1,80\n")
    with pytest.raises(UnsupportedRate):
        signalio.load_records(f)
    with pytest.raises(UnsupportedRate):
        WaveformRecord("s", -5, [1.0], [1.0])


def test_channel_length_mismatch():
    with pytest.raises(MalformedRecord):
        WaveformRecord("s", 125, [1.0, 2.0], [1.0])


def test_bad_binary_magic(tmp_path):
    f = tmp_path / "x.pgrd"
    f.write_bytes(b"XXXX" + bytes(12))
    with pytest.raises(MalformedRecord):
        signalio.load_records(f)


def test_records_are_read_only():
    rec = make_record()
    with pytest.raises(ValueError):
        rec.ecg[0] = 1.0


def test_segment_45s_gives_three_windows():
    segs = signalio.segment(make_record(seconds=45), 3)
    assert len(segs) == 3 and all(s.ecg_window.size == 1875 for s in segs)


def test_segment_windows_are_consecutive_from_zero():
    rec = make_record(seconds=60)
    segs = signalio.segment(rec, 3)
    for w, s in enumerate(segs):
        assert s.start == w * 1875
        assert np.array_equal(s.abp_window, rec.abp[w * 1875 : (w + 1) * 1875])
    covered = np.concatenate([s.ecg_window for s in segs])
    assert np.array_equal(covered, rec.ecg[: 3 * 1875])


def test_segment_too_short():
    with pytest.raises(TooShort):
        signalio.segment(make_record(seconds=15), 2)


def test_labels_min_max_and_map():
    abp = np.full(1875, 100.0)
    abp[10], abp[500] = 80.0, 120.0
    lab = signalio.derive_labels(abp, 125)
    assert (lab.dbp, lab.sbp) == (80.0, 120.0)
    assert lab.map == pytest.approx(93.3333333333, abs=1e-9)


def test_constant_window_is_implausible():
    with pytest.raises(ImplausibleLabel):
        signalio.derive_labels(np.full(1875, 100.0), 125)


@pytest.mark.parametrize("lo,hi", [(20.0, 120.0), (80.0, 310.0)])
def test_label_plausibility_bounds(lo, hi):
    abp = np.linspace(lo, hi, 1875)
    with pytest.raises(ImplausibleLabel):
        signalio.derive_labels(abp, 125)


def test_map_invariant_on_every_segment(small_corpus):
    recs, _ = small_corpus
    for rec in recs:
        for s in signalio.segment(rec, 3):
            lab = s.labels
            assert abs(lab.map - (2 * lab.dbp + lab.sbp) / 3) <= 1e-9
            assert lab.dbp <= lab.map <= lab.sbp


def test_planted_labels_recovered_within_noise():
    cfg = synth.SynthConfig(n_subjects=10, seed=4)
    recs, truth = synth.generate(cfg)
    for rec in recs:
        for s, w in zip(signalio.segment(rec, 3), truth.window_labels(rec.subject_id)):
            assert abs(s.labels.dbp - w.dbp) <= 0.5
            assert abs(s.labels.sbp - w.sbp) <= 0.5


def test_labels_from_table_means():
    # a window spanning the published mean DBP and SBP exactly
    abp = np.linspace(62.66, 133.32, 1875)
    lab = signalio.derive_labels(abp, 125)
    assert lab == BpLabels.from_extremes(62.66, 133.32)


def test_regularity():
    assert signalio.check_regularity([0, 125, 250, 375, 500], 125)
    rr = np.cumsum([0, 0.8, 0.8, 1.6]) * 125
    assert not signalio.check_regularity(rr.astype(int), 125, 0.20)
    assert not signalio.check_regularity([0, 125], 125)


def test_af_records_are_irregular():
    from pulsegrid import ampd, dsp

    recs, _ = synth.generate(synth.SynthConfig(n_subjects=40, af_mode=True, seed=9))
    flags = []
    for rec in recs:
        seg = signalio.segment(rec, 1)[0]
        peaks = ampd.detect_peaks(dsp.preprocess_ecg(seg.ecg_window, 125), fs=125)
        flags.append(signalio.check_regularity(peaks, 125))
    assert np.mean(np.logical_not(flags)) >= 0.95

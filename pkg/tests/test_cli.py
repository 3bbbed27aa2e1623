import io

import numpy as np
import pytest

from pulsegrid import cli, features, signalio

PUBLISHED_TABLES = """table,target,c1,c2,c3,c4
II,DBP,90,97,100,
II,MAP,88,95,100,
II,SBP,84,90,93,
III,DBP,-0.100,4.201,443,
III,MAP,-0.154,4.629,443,
III,SBP,-0.291,8.831,443,
"""


def run(argv, env=None):
    out = io.StringIO()
    code = cli.run_subcommand(argv, environ=env or {}, stdout=out)
    return code, out.getvalue()


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli") / "corpus"
    assert run(["synth", "--subjects", "10", "--seed", "2", "--out", str(d)])[0] == 0
    return d


def manifest(path):
    return dict(line.split(" = ", 1) for line in (path / cli.MANIFEST).read_text().splitlines())


def test_synth_writes_records_sidecar_and_manifest(corpus):
    names = sorted(p.name for p in corpus.iterdir())
    assert "ground_truth.txt" in names and "manifest.txt" in names
    assert len(signalio.load_records(corpus)) == 10
    m = manifest(corpus)
    assert m["subcommand"] == "synth" and m["seed"] == "2" and m["seed_source"] == "flag"
    assert m["tool"].startswith("pulsegrid ")
    assert "output.ground_truth.txt" in m


def test_binary_format(tmp_path):
    assert run(["synth", "--subjects", "2", "--format", "binary", "--out", str(tmp_path / "b")])[0] == 0
    assert sorted(p.suffix for p in (tmp_path / "b").iterdir()).count(".pgrd") == 2


def test_peaks_one_integer_per_line(corpus, tmp_path):
    code, _ = run(["peaks", "--input", str(corpus), "--deterministic", "--out", str(tmp_path / "p")])
    assert code == 0
    files = sorted((tmp_path / "p").glob("peaks_*.txt"))
    assert len(files) == 30
    vals = [int(v) for v in files[0].read_text().split()]
    assert vals == sorted(vals) and len(vals) > 5


def test_preprocess_band_flags(corpus, tmp_path):
    assert run(["preprocess", "--input", str(corpus), "--lo", "1", "--hi", "30", "--out", str(tmp_path / "pp")])[0] == 0
    lines = (tmp_path / "pp" / "preprocessed.txt").read_text().splitlines()
    assert len(lines) == 60 and lines[0].startswith("# s000,0,125,")
    assert manifest(tmp_path / "pp")["config.hi"] == "30.0"


def test_features_train_evaluate_chain(corpus, tmp_path):
    f = tmp_path / "f"
    assert run(["features", "--input", str(corpus), "--length", "200", "--out", str(f)])[0] == 0
    ds = features.read_dataset(f / "dataset.csv")
    assert ds.X.shape[1] == 200
    t = tmp_path / "t"
    assert run(["train", "--input", str(f / "dataset.csv"), "--rounds", "4", "--depth", "2", "--seed", "3", "--out", str(t)])[0] == 0
    assert (t / "ensembles.txt").read_text().startswith("dbp,4,2,5,")
    assert (t / "pca_model.txt").read_text().startswith("200,")
    e = tmp_path / "e"
    code, text = run(["evaluate", "--input", str(f / "dataset.csv"), "--k", "5", "--rounds", "5", "--out", str(e)])
    assert code == 0 and text.startswith("table,")
    for name in ("report.txt", "report_tables.csv", "bland_altman_dbp.csv", "bland_altman_map.csv", "bland_altman_sbp.csv"):
        assert (e / name).exists()
    rows = (e / "bland_altman_sbp.csv").read_text().splitlines()
    assert rows[0] == "mean,diff" and len(rows) == len(ds) + 1
    np.array([r.split(",") for r in rows[1:]], dtype=float)
    # report reads an evaluate directory back
    code, text = run(["report", "--from", "report", "--input", str(e), "--out", str(tmp_path / "r")])
    assert code == 0 and text.count("grade") == 3


def test_report_from_published_tables(tmp_path):
    src = tmp_path / "tables.csv"
    src.write_text(PUBLISHED_TABLES)
    code, text = run(["report", "--from", "tables", "--input", str(src), "--out", str(tmp_path / "r")])
    assert code == 0
    grades = [ln.split()[-1] for ln in text.splitlines() if ln.startswith("BHS")]
    verdicts = [ln.split()[-1] for ln in text.splitlines() if ln.startswith("AAMI")]
    assert grades == ["A", "A", "B"]
    assert verdicts == ["pass", "pass", "fail(sd)"]


def test_unknown_flag_exits_1_without_artifacts(tmp_path):
    out = tmp_path / "never"
    assert cli.main(["evaluate", "--bogus", "--out", str(out)]) == 1
    assert not out.exists() and list(tmp_path.iterdir()) == []


def test_unknown_subcommand(capsys):
    assert cli.main(["frobnicate"]) == 1
    assert "frobnicate" in capsys.readouterr().err
    assert cli.main([]) == 1


def test_validation_error_leaves_no_partial_output(tmp_path):
    bad = tmp_path / "bad.rec"
    bad.write_text("s,125,2\n0.1,80\n0.2,nan\n")
    out = tmp_path / "o"
    assert cli.main(["features", "--input", str(bad), "--out", str(out)]) == 1
    assert not out.exists()
    assert [p.name for p in tmp_path.iterdir()] == ["bad.rec"]


def test_missing_input(tmp_path):
    assert cli.main(["features", "--input", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 1


def test_config_file_and_precedence(corpus, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\nseed = 7\nrounds = 3\nsplit_by = record\n")
    code, _ = run(["train", "--config", str(cfg), "--input", str(corpus), "--length", "100", "--out", str(tmp_path / "a")],
                  env={cli.SEED_ENV: "99"})
    m = manifest(tmp_path / "a")
    assert code == 0 and m["seed"] == "7" and m["seed_source"] == "config" and m["config.rounds"] == "3"
    run(["train", "--config", str(cfg), "--seed", "1", "--input", str(corpus), "--length", "100", "--out", str(tmp_path / "b")])
    assert manifest(tmp_path / "b")["seed"] == "1"
    run(["train", "--input", str(corpus), "--length", "100", "--rounds", "2", "--out", str(tmp_path / "c")], env={cli.SEED_ENV: "99"})
    m = manifest(tmp_path / "c")
    assert m["seed"] == "99" and m["seed_source"] == "env"


@pytest.mark.parametrize("text,key", [("colour = red\n", "colour"), ("rounds = many\n", "rounds"), ("k = 1\n", "k")])
def test_bad_config_names_key(tmp_path, capsys, text, key):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    assert cli.main(["synth", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert key in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_identical_runs_give_identical_manifests(corpus, tmp_path):
    for d in ("x", "y"):
        run(["features", "--input", str(corpus), "--length", "64", "--out", str(tmp_path / d)])
    assert (tmp_path / "x" / "manifest.txt").read_bytes().replace(b"/x", b"/y") == (tmp_path / "y" / "manifest.txt").read_bytes()
    assert (tmp_path / "x" / "dataset.csv").read_bytes() == (tmp_path / "y" / "dataset.csv").read_bytes()


def test_inputs_not_mutated(corpus, tmp_path):
    before = {p.name: p.read_bytes() for p in corpus.iterdir()}
    run(["features", "--input", str(corpus), "--length", "64", "--out", str(tmp_path / "z")])
    assert {p.name: p.read_bytes() for p in corpus.iterdir()} == before


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "pulsegrid", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("pulsegrid ")

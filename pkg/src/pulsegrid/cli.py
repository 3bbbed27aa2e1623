"""Command-line front-end: ``pulsegrid <subcommand> [flags]``.

Settings resolve in this order, later winning: built-in defaults, the
``PULSEGRID_SEED`` environment variable (seed only), ``--config`` file,
command-line flags. Every run writes ``manifest.txt`` next to its outputs.
Exit status is 0 on success, 1 on a validation or configuration error and
2 on an internal failure. Outputs are staged and only moved into ``--out``
once the whole subcommand has succeeded.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import math
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, ampd, dsp, evaluation, features, pca, signalio, synth
from .boost import BoostParams, TARGET_ORDER, save_ensembles, train_targets
from .errors import (
    ConfigError,
    MalformedRecord,
    PulseGridError,
    UnknownSubcommand,
    ValidationError,
)

SUBCOMMANDS = ("synth", "preprocess", "peaks", "features", "train", "evaluate", "report")
SEED_ENV = "PULSEGRID_SEED"
MANIFEST = "manifest.txt"


@dataclass(frozen=True)
class RunConfig:
    lo: float = 0.8
    hi: float = 40.0
    length: int = features.DEFAULT_LENGTH
    retain: float = pca.DEFAULT_RETAIN
    rounds: int = 100
    depth: int = 4
    min_leaf: int = 5
    loss: str = "linear"
    k: int = 10
    split_by: str = "subject"
    pca_global: bool = False
    seed: int = 0
    subjects: int = 40
    snr: float = 20.0
    af: bool = False
    fs: int = 125
    windows: int = 3
    regularity: float = 0.20
    deterministic: bool = True
    format: str = "text"
    source: str = "tables"
    input: str = ""
    out: str = ""

    def validate(self) -> None:
        checks = {
            "lo": 0 <= self.lo < self.hi,
            "hi": self.hi > self.lo,
            "length": self.length >= 2,
            "retain": 0 < self.retain <= 1,
            "rounds": self.rounds >= 1,
            "depth": self.depth >= 0,
            "min_leaf": self.min_leaf >= 1,
            "loss": self.loss in ("linear", "square", "exponential"),
            "k": self.k >= 2,
            "split_by": self.split_by in ("subject", "record"),
            "subjects": self.subjects >= 1,
            "snr": not math.isnan(self.snr),
            "fs": self.fs > 0,
            "windows": self.windows >= 1,
            "regularity": self.regularity >= 0,
            "format": self.format in ("text", "binary"),
            "source": self.source in ("tables", "report"),
        }
        for key, ok in checks.items():
            if not ok:
                raise ConfigError(f"invalid value for {key}: {getattr(self, key)!r}")

    def band(self) -> dsp.BandSpec:
        return dsp.BandSpec(self.lo, self.hi)

    def boost_params(self) -> BoostParams:
        return BoostParams(self.rounds, self.depth, self.min_leaf, self.loss)


_FIELD_TYPES = {f.name: type(f.default) for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, text: str):
    kind = _FIELD_TYPES.get(key)
    if kind is None:
        raise ConfigError(f"unknown config key: {key}")
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value for config key {key}: {text!r}") from None


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment; keys use underscores."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _coerce(key, value)
    return out


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common(p):
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)


def _band(p):
    p.add_argument("--lo", type=float, help="pass-band lower edge, Hz (0.8)")
    p.add_argument("--hi", type=float, help="pass-band upper edge, Hz (40)")


def _input(p, what):
    p.add_argument("--input", help=what)


def _boost(p):
    p.add_argument("--rounds", type=int, help="boosting rounds T (100)")
    p.add_argument("--depth", type=int, help="tree depth (4)")
    p.add_argument("--min-leaf", dest="min_leaf", type=int, help="minimum rows per leaf (5)")
    p.add_argument("--loss", choices=("linear", "square", "exponential"))
    p.add_argument("--retain", type=float, help="PCA energy fraction (0.98)")


def _features(p):
    p.add_argument("--length", type=int, help="beat vector length L (625)")
    p.add_argument("--regularity", type=float, help="RR regularity tolerance (0.20)")
    p.add_argument("--windows", type=int, help="15 s windows per record (3)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pulsegrid", description="ECG to blood-pressure pipeline")
    parser.add_argument("--version", action="version", version=f"pulsegrid {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic ECG/ABP corpus")
    _common(p)
    p.add_argument("--subjects", type=int)
    p.add_argument("--snr", type=float, help="ECG SNR in dB; inf for noiseless")
    p.add_argument("--af", action="store_true", default=None, help="atrial-fibrillation mode")
    p.add_argument("--windows", type=int)
    p.add_argument("--format", choices=("text", "binary"))

    p = sub.add_parser("preprocess", help="filter and normalise every 15 s ECG window")
    _common(p)
    _input(p, "record file or directory")
    _band(p)
    p.add_argument("--windows", type=int)

    p = sub.add_parser("peaks", help="AMPD R peaks of every preprocessed window")
    _common(p)
    _input(p, "record file or directory")
    _band(p)
    p.add_argument("--windows", type=int)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--deterministic", action="store_true", default=None)
    g.add_argument("--random", dest="deterministic", action="store_false", default=None)

    p = sub.add_parser("features", help="beat-vector dataset from records")
    _common(p)
    _input(p, "record file or directory")
    _band(p)
    _features(p)

    p = sub.add_parser("train", help="fit PCA and the three boosted ensembles")
    _common(p)
    _input(p, "dataset file or record directory")
    _band(p)
    _features(p)
    _boost(p)

    p = sub.add_parser("evaluate", help="subject-disjoint k-fold cross-validation")
    _common(p)
    _input(p, "dataset file or record directory")
    _band(p)
    _features(p)
    _boost(p)
    p.add_argument("--k", type=int, help="fold count (10)")
    p.add_argument("--split-by", dest="split_by", choices=("subject", "record"))
    p.add_argument("--pca-global", dest="pca_global", action="store_true", default=None)

    p = sub.add_parser("report", help="grade BHS/AAMI tables")
    _common(p)
    _input(p, "tables CSV, or an evaluate output directory")
    p.add_argument("--from", dest="source", choices=("tables", "report"))
    return parser


def resolve_config(args: argparse.Namespace, environ=None) -> tuple[RunConfig, str]:
    """Merge defaults, environment, config file and flags; return config and seed source."""
    environ = os.environ if environ is None else environ
    values: dict = {}
    seed_source = "default"
    if environ.get(SEED_ENV, "").strip():
        values["seed"] = _coerce("seed", environ[SEED_ENV])
        seed_source = "env"
    if getattr(args, "config", None):
        file_values = read_config_file(args.config)
        if "seed" in file_values:
            seed_source = "config"
        values.update(file_values)
    for key in _FIELD_TYPES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
            if key == "seed":
                seed_source = "flag"
    if values.get("out") in (None, ""):
        values["out"] = f"pulsegrid_{args.command}"
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg, seed_source


# ---------------------------------------------------------------------------
# helpers


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _input_files(path: Path) -> list[Path]:
    if path.is_dir():
        return sorted(p for p in path.rglob("*") if p.is_file())
    return [path]


def _require_input(cfg: RunConfig) -> Path:
    if not cfg.input:
        raise ValidationError("--input is required")
    path = Path(cfg.input)
    if not path.exists():
        raise ValidationError(f"input not found: {path}")
    return path


def _is_record_input(path: Path) -> bool:
    return path.is_dir() or path.suffix in (signalio.TEXT_SUFFIX, signalio.BINARY_SUFFIX)


def _segments(cfg: RunConfig, path: Path):
    return [s for rec in signalio.load_records(path) for s in signalio.segment(rec, cfg.windows)]


def _dataset(cfg: RunConfig, path: Path) -> features.Dataset:
    if _is_record_input(path):
        return features.build_dataset(
            signalio.load_records(path), cfg.windows, cfg.length, cfg.band(), cfg.regularity
        )
    return features.read_dataset(path)


def _write_manifest(stage: Path, cfg: RunConfig, command: str, seed_source: str, inputs: list[Path]):
    lines = [
        f"tool = pulsegrid {__version__}",
        f"numpy = {np.__version__}",
        f"subcommand = {command}",
        f"seed = {cfg.seed}",
        f"seed_source = {seed_source}",
    ]
    for f in dataclasses.fields(RunConfig):
        lines.append(f"config.{f.name} = {getattr(cfg, f.name)}")
    root = Path(cfg.input) if cfg.input else None
    for p in inputs:
        name = p.relative_to(root).as_posix() if root is not None and root.is_dir() else p.name
        lines.append(f"input.{name} = {_sha256(p)}")
    for p in sorted(stage.iterdir()):
        lines.append(f"output.{p.name} = {_sha256(p)}")
    (stage / MANIFEST).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# subcommands; each writes into the staging directory and returns stdout text


def cmd_synth(cfg: RunConfig, stage: Path) -> str:
    sc = synth.SynthConfig(
        n_subjects=cfg.subjects, fs=cfg.fs, snr_db=cfg.snr, af_mode=cfg.af,
        seed=cfg.seed, n_windows=cfg.windows,
    )
    records, truth = synth.generate(sc)
    synth.write_records(records, truth, stage, cfg.format)
    return f"wrote {len(records)} records and {synth.GROUND_TRUTH_FILE}\n"


def cmd_preprocess(cfg: RunConfig, stage: Path) -> str:
    segs = _segments(cfg, _require_input(cfg))
    lines = []
    for s in segs:
        x = dsp.preprocess_ecg(s.ecg_window, s.fs, cfg.band())
        lab = s.labels
        lines.append(f"# {s.subject_id},{s.window_index},{s.fs},{lab.dbp!r},{lab.map!r},{lab.sbp!r}")
        lines.append(",".join(repr(v) for v in x.tolist()))
    (stage / "preprocessed.txt").write_text("\n".join(lines) + "\n")
    return f"preprocessed {len(segs)} windows\n"


def cmd_peaks(cfg: RunConfig, stage: Path) -> str:
    segs = _segments(cfg, _require_input(cfg))
    total = 0
    for s in segs:
        x = dsp.preprocess_ecg(s.ecg_window, s.fs, cfg.band())
        peaks = ampd.detect_peaks(x, fs=s.fs, deterministic=cfg.deterministic, seed=cfg.seed)
        total += len(peaks.indices)
        text = "".join(f"{int(i)}\n" for i in peaks.indices)
        (stage / f"peaks_{s.subject_id}_w{s.window_index}.txt").write_text(text)
    return f"{total} peaks in {len(segs)} windows\n"


def cmd_features(cfg: RunConfig, stage: Path) -> str:
    ds = _dataset(cfg, _require_input(cfg))
    features.write_dataset(ds, stage / "dataset.csv")
    return f"{len(ds)} beat vectors of length {ds.X.shape[1]} from {len(set(ds.subjects))} subjects\n"


def cmd_train(cfg: RunConfig, stage: Path) -> str:
    ds = _dataset(cfg, _require_input(cfg))
    model = pca.pca_fit(ds.X, cfg.retain)
    Z = model.transform(ds.X)
    models = train_targets(Z, {t: ds.target(t) for t in TARGET_ORDER}, cfg.boost_params(), cfg.seed)
    pca.save_model(model, stage / "pca_model.txt")
    save_ensembles(models, stage / "ensembles.txt")
    rounds = ", ".join(f"{t}={models[t].rounds_completed}" for t in TARGET_ORDER)
    return f"PCA {model.dim} -> {model.k}; rounds completed: {rounds}\n"


def cmd_evaluate(cfg: RunConfig, stage: Path) -> str:
    ds = _dataset(cfg, _require_input(cfg))
    rep, _ = evaluation.evaluate(
        ds, cfg.k, cfg.seed, cfg.boost_params(), cfg.retain, cfg.split_by, cfg.pca_global
    )
    evaluation.write_report(rep, stage)
    return evaluation.format_tables_csv(rep.bhs, rep.stats, rep.aami)


def parse_tables(text: str) -> tuple[dict, dict]:
    """Read ``II`` rows (pct5, pct10, pct15) and ``III`` rows (me, sd, subjects).

    Grade and verdict columns, if present, are ignored and recomputed.
    """
    bhs, aami = {}, {}
    for no, raw in enumerate(text.splitlines(), 1):
        f = [c.strip() for c in raw.split(",")]
        if len(f) < 5 or f[0] not in ("II", "III"):
            continue
        try:
            nums = [float(v) for v in f[2:5]]
        except ValueError:
            continue  # column header row
        target = f[1].upper()
        if f[0] == "II":
            bhs[target] = nums
        else:
            if nums[2] != int(nums[2]):
                raise MalformedRecord(f"line {no}: subject count must be an integer")
            aami[target] = evaluation.ErrorStats(nums[0], nums[1], math.nan, math.nan, 0, int(nums[2]))
    if not bhs and not aami:
        raise MalformedRecord("no II or III rows found")
    return bhs, aami


def cmd_report(cfg: RunConfig, stage: Path) -> str:
    path = _require_input(cfg)
    if cfg.source == "report" or path.is_dir():
        path = path / "report_tables.csv"
        if not path.exists():
            raise ValidationError(f"no report_tables.csv in {cfg.input}")
    bhs, aami = parse_tables(path.read_text())
    lines = []
    for t, (p5, p10, p15) in bhs.items():
        grade = evaluation.grade_from_percentages(p5, p10, p15)
        lines.append(f"BHS {t} {p5:g} {p10:g} {p15:g} grade {grade}")
    for t, s in aami.items():
        lines.append(f"AAMI {t} {s.me:.3f} {s.sd:.3f} {s.n_subjects} {evaluation.aami_check(s)}")
    text = "\n".join(lines) + "\n"
    (stage / "summary.txt").write_text(text)
    return text


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "peaks": cmd_peaks,
    "features": cmd_features,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def _commit(stage: Path, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for p in sorted(stage.iterdir()):
        os.replace(p, out / p.name)


def run_subcommand(argv, environ=None, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    argv = list(argv)
    first = next((a for a in argv if not a.startswith("-")), None)
    if first is None or first not in SUBCOMMANDS:
        if any(a in ("-h", "--help", "--version") for a in argv):
            build_parser().parse_args(argv)  # prints and exits 0
        raise UnknownSubcommand(
            f"unknown subcommand {first!r}; expected one of {', '.join(SUBCOMMANDS)}"
            if first else f"missing subcommand; expected one of {', '.join(SUBCOMMANDS)}"
        )
    args = build_parser().parse_args(argv)
    cfg, seed_source = resolve_config(args, environ)
    out = Path(cfg.out)
    if out.exists() and not out.is_dir():
        raise ValidationError(f"--out {out} exists and is not a directory")
    inputs = _input_files(Path(cfg.input)) if cfg.input and Path(cfg.input).exists() else []
    parent = out.resolve().parent
    parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out.name}.partial-", dir=parent))
    try:
        message = COMMANDS[args.command](cfg, stage)
        _write_manifest(stage, cfg, args.command, seed_source, inputs)
        _commit(stage, out)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    stdout.write(message)
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return run_subcommand(argv)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (ValidationError, ConfigError) as exc:
        print(f"pulsegrid: error: {exc}", file=sys.stderr)
        return 1
    except (PulseGridError, Exception) as exc:
        print(f"pulsegrid: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

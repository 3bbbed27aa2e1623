"""Cross-validation, error statistics and the BHS / AAMI / Bland-Altman checks."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import pca as pca_mod
from .boost import BoostParams, TARGET_ORDER, train_targets
from .errors import DegenerateFold, EmptyPairs, TooFewPairs, TooFewSubjects
from .features import Dataset

BHS_THRESHOLDS = {"A": (60, 85, 95), "B": (50, 75, 90), "C": (40, 65, 85)}
AAMI_MAX_ME = 5.0
AAMI_MAX_SD = 8.0
AAMI_MIN_SUBJECTS = 85
STANDARD_MIN_SAMPLES = 225


# ---------------------------------------------------------------------------
# folds


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: dict
    seed: int

    def fold_of(self, unit) -> int:
        return self.assignments[unit]

    def fold_sizes(self) -> list[int]:
        sizes = [0] * self.k
        for f in self.assignments.values():
            sizes[f] += 1
        return sizes

    def digest(self) -> str:
        text = "\n".join(f"{u},{f}" for u, f in sorted(self.assignments.items()))
        return hashlib.sha256(f"k={self.k},seed={self.seed}\n{text}".encode()).hexdigest()


def make_folds(subject_ids, k: int = 10, seed: int = 0) -> FoldPlan:
    """Seeded shuffle of the distinct subjects, then round-robin fold assignment."""
    units = sorted(set(subject_ids))
    if k < 2:
        raise ValueError("need at least two folds")
    if len(units) < k:
        raise TooFewSubjects(f"{len(units)} distinct subjects cannot fill {k} folds")
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(len(units))
    return FoldPlan(k, {units[j]: pos % k for pos, j in enumerate(perm)}, seed)


# ---------------------------------------------------------------------------
# cross-validation


@dataclass
class CvResult:
    estimates: dict
    references: dict
    subjects: np.ndarray
    fold_of_row: np.ndarray
    pca_dims: list = field(default_factory=list)
    rounds: dict = field(default_factory=dict)

    def pairs(self, target: str) -> np.ndarray:
        return np.column_stack([self.estimates[target], self.references[target]])


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1, np.uint32)[0])


def canonical_order(dataset: Dataset) -> np.ndarray:
    """Row indices sorted by row content alone (subject, labels, features).

    Training rows are presented to PCA and boosting in this order, so the
    pooled out-of-fold pairs do not depend on how the dataset rows happen
    to be ordered.
    """
    subj = np.unique(dataset.subjects.astype(str), return_inverse=True)[1]
    keys = [dataset.X[:, j] for j in range(dataset.X.shape[1] - 1, -1, -1)]
    keys += [dataset.sbp, dataset.map, dataset.dbp, subj]
    return np.lexsort(keys)


def run_cv(
    dataset: Dataset,
    plan: FoldPlan,
    params: BoostParams = BoostParams(),
    retain: float = pca_mod.DEFAULT_RETAIN,
    split_by: str = "subject",
    pca_global: bool = False,
) -> CvResult:
    """Out-of-fold estimates for every row and every target.

    PCA is fitted on the training rows of each fold unless ``pca_global``.
    """
    if split_by == "subject":
        units = dataset.subjects
    elif split_by == "record":
        units = dataset.record_keys()
    else:
        raise ValueError(f"split_by must be 'subject' or 'record', got {split_by!r}")
    missing = set(units) - set(plan.assignments)
    if missing:
        raise ValueError(f"fold plan does not cover {len(missing)} unit(s), e.g. {sorted(missing)[0]!r}")
    fold_of_row = np.array([plan.assignments[u] for u in units], dtype=np.int64)
    n = len(dataset)
    est = {t: np.full(n, np.nan) for t in TARGET_ORDER}
    ref = {t: dataset.target(t).copy() for t in TARGET_ORDER}
    result = CvResult(est, ref, dataset.subjects, fold_of_row)
    canon = canonical_order(dataset)
    global_model = pca_mod.pca_fit(dataset.X[canon], retain) if pca_global else None

    for f in range(plan.k):
        test = np.flatnonzero(fold_of_row == f)
        train = canon[fold_of_row[canon] != f]
        if test.size == 0:
            continue
        if train.size < 2:
            raise DegenerateFold(f"fold {f} leaves {train.size} training rows")
        if split_by == "subject":
            shared = set(dataset.subjects[train]) & set(dataset.subjects[test])
            assert not shared, f"subject leakage in fold {f}: {sorted(shared)[:3]}"
        model = global_model or pca_mod.pca_fit(dataset.X[train], retain)
        Ztr = pca_mod.pca_transform(model, dataset.X[train])
        Zte = pca_mod.pca_transform(model, dataset.X[test])
        labels = {t: dataset.target(t)[train] for t in TARGET_ORDER}
        models = train_targets(Ztr, labels, params, _fold_seed(plan.seed, f))
        result.pca_dims.append(model.k)
        for t in TARGET_ORDER:
            est[t][test] = models[t].predict(Zte)
            result.rounds.setdefault(t, []).append(models[t].rounds_completed)

    for t in TARGET_ORDER:
        # partition property: every row is a test point exactly once
        assert np.isfinite(est[t]).all() and est[t].size == n
    return result


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class ErrorStats:
    me: float
    sd: float
    mae: float
    mae_sd: float
    n: int
    n_subjects: int


def _pairs(estimates, references=None):
    if references is None:
        arr = np.asarray(estimates, dtype=np.float64).reshape(-1, 2)
        return arr[:, 0], arr[:, 1]
    return np.asarray(estimates, dtype=np.float64), np.asarray(references, dtype=np.float64)


def error_stats(estimates, references=None, subjects=None) -> ErrorStats:
    """Signed and absolute error summaries of ``estimate - reference`` (SD divisor n-1).

    Accepts two parallel arrays or one (n, 2) array of pairs.
    """
    e, r = _pairs(estimates, references)
    if e.size == 0:
        raise EmptyPairs("no pairs")
    err = e - r
    a = np.abs(err)
    ddof = 1 if err.size > 1 else 0
    n_subj = len(set(subjects)) if subjects is not None else 0
    return ErrorStats(
        float(err.mean()), float(err.std(ddof=ddof)), float(a.mean()), float(a.std(ddof=ddof)),
        int(err.size), n_subj,
    )


@dataclass(frozen=True)
class BhsResult:
    pct5: float
    pct10: float
    pct15: float
    grade: str


def grade_from_percentages(pct5: float, pct10: float, pct15: float) -> str:
    """BHS grade; every threshold comparison is inclusive."""
    for grade, (t5, t10, t15) in BHS_THRESHOLDS.items():
        if pct5 >= t5 and pct10 >= t10 and pct15 >= t15:
            return grade
    return "D"


def bhs_grade(abs_errors) -> BhsResult:
    a = np.abs(np.asarray(abs_errors, dtype=np.float64))
    if a.size == 0:
        raise EmptyPairs("no errors to grade")
    p5, p10, p15 = (100.0 * np.count_nonzero(a <= lim) / a.size for lim in (5, 10, 15))
    return BhsResult(float(p5), float(p10), float(p15), grade_from_percentages(p5, p10, p15))


@dataclass(frozen=True)
class AamiVerdict:
    passed: bool
    reasons: tuple = ()

    def __str__(self):
        return "pass" if self.passed else f"fail({','.join(self.reasons)})"


def aami_check(stats: ErrorStats, min_subjects: int = AAMI_MIN_SUBJECTS) -> AamiVerdict:
    """|ME| <= 5 mmHg, SD <= 8 mmHg and at least ``min_subjects`` subjects."""
    reasons = []
    if abs(stats.me) > AAMI_MAX_ME:
        reasons.append("me")
    if stats.sd > AAMI_MAX_SD:
        reasons.append("sd")
    if stats.n_subjects < min_subjects:
        reasons.append("subjects")
    return AamiVerdict(not reasons, tuple(reasons))


@dataclass(frozen=True)
class BlandAltman:
    means: np.ndarray
    diffs: np.ndarray
    mean_diff: float
    loa_low: float
    loa_high: float

    def inside_fraction(self) -> float:
        return float(np.mean((self.diffs >= self.loa_low) & (self.diffs <= self.loa_high)))


def bland_altman(estimates, references=None) -> BlandAltman:
    e, r = _pairs(estimates, references)
    if e.size < 2:
        raise TooFewPairs("Bland-Altman needs at least two pairs")
    d = e - r
    md = float(d.mean())
    sd = float(d.std(ddof=1))
    return BlandAltman((e + r) / 2.0, d, md, md - 1.96 * sd, md + 1.96 * sd)


# ---------------------------------------------------------------------------
# report


@dataclass
class EvalReport:
    stats: dict
    bhs: dict
    aami: dict
    bland_altman: dict
    params: BoostParams
    retain: float
    k: int
    seed: int
    split_by: str
    pca_global: bool
    fold_digest: str
    dataset_digest: str
    n_rows: int
    pca_dims: list
    rounds: dict


def dataset_digest(ds: Dataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.X).tobytes())
    for t in TARGET_ORDER:
        h.update(np.ascontiguousarray(ds.target(t)).tobytes())
    h.update("\n".join(map(str, ds.subjects)).encode())
    return h.hexdigest()


def evaluate(
    dataset: Dataset,
    k: int = 10,
    seed: int = 0,
    params: BoostParams = BoostParams(),
    retain: float = pca_mod.DEFAULT_RETAIN,
    split_by: str = "subject",
    pca_global: bool = False,
) -> tuple[EvalReport, CvResult]:
    units = dataset.subjects if split_by == "subject" else dataset.record_keys()
    plan = make_folds(units, k, seed)
    cv = run_cv(dataset, plan, params, retain, split_by, pca_global)
    stats, bhs, aami, ba = {}, {}, {}, {}
    for t in TARGET_ORDER:
        stats[t] = error_stats(cv.estimates[t], cv.references[t], dataset.subjects)
        bhs[t] = bhs_grade(cv.estimates[t] - cv.references[t])
        aami[t] = aami_check(stats[t])
        ba[t] = bland_altman(cv.estimates[t], cv.references[t])
    report = EvalReport(
        stats, bhs, aami, ba, params, retain, k, seed, split_by, pca_global,
        plan.digest(), dataset_digest(dataset), len(dataset), cv.pca_dims, cv.rounds,
    )
    return report, cv


def whole_percent(p: float) -> int:
    # truncated, as in the published BHS tables
    return int(math.floor(p + 1e-9))


def format_report(rep: EvalReport) -> str:
    p = rep.params
    lines = [
        "# pulsegrid evaluation report",
        f"rows = {rep.n_rows}",
        f"dataset_digest = {rep.dataset_digest}",
        f"fold_digest = {rep.fold_digest}",
        f"k = {rep.k}",
        f"seed = {rep.seed}",
        f"split_by = {rep.split_by}",
        f"pca_global = {str(rep.pca_global).lower()}",
        f"retain = {rep.retain!r}",
        f"pca_dims = {','.join(map(str, rep.pca_dims))}",
        f"rounds = {p.rounds}",
        f"depth = {p.max_depth}",
        f"min_leaf = {p.min_leaf}",
        f"loss = {p.loss}",
    ]
    for t in TARGET_ORDER:
        s, b, a, ba = rep.stats[t], rep.bhs[t], rep.aami[t], rep.bland_altman[t]
        u = t.upper()
        lines += [
            f"[{u}]",
            f"n = {s.n}",
            f"subjects = {s.n_subjects}",
            f"me = {s.me:.3f}",
            f"sd = {s.sd:.3f}",
            f"mae = {s.mae:.3f}",
            f"mae_sd = {s.mae_sd:.3f}",
            f"bhs_pct = {whole_percent(b.pct5)},{whole_percent(b.pct10)},{whole_percent(b.pct15)}",
            f"bhs_grade = {b.grade}",
            f"aami = {a}",
            f"ba_mean_diff = {ba.mean_diff:.3f}",
            f"ba_loa = {ba.loa_low:.3f},{ba.loa_high:.3f}",
            f"rounds_completed = {','.join(map(str, rep.rounds.get(t, [])))}",
        ]
    lines.append(
        f"# note: both standards also ask for at least {STANDARD_MIN_SAMPLES} samples; "
        f"AAMI verdicts here enforce >= {AAMI_MIN_SUBJECTS} subjects"
    )
    return "\n".join(lines) + "\n"


def format_bland_altman_csv(ba: BlandAltman) -> str:
    rows = ["mean,diff"] + [f"{m:.6f},{d:.6f}" for m, d in zip(ba.means, ba.diffs)]
    return "\n".join(rows) + "\n"


def format_tables_csv(bhs: dict, stats: dict, aami: dict) -> str:
    rows = ["table,target,c1,c2,c3,c4", "II,target,le5mmHg,le10mmHg,le15mmHg,grade"]
    for t in TARGET_ORDER:
        b = bhs[t]
        rows.append(
            f"II,{t.upper()},{whole_percent(b.pct5)},{whole_percent(b.pct10)},{whole_percent(b.pct15)},{b.grade}"
        )
    rows.append("III,target,mean_mmHg,sd_mmHg,subjects,aami")
    for t in TARGET_ORDER:
        s = stats[t]
        rows.append(f"III,{t.upper()},{s.me:.3f},{s.sd:.3f},{s.n_subjects},{aami[t]}")
    rows.append("IV,target,mae,sd_abs,,")
    for t in TARGET_ORDER:
        s = stats[t]
        rows.append(f"IV,{t.upper()},{s.mae:.3f},{s.mae_sd:.3f},,")
    return "\n".join(rows) + "\n"


def write_report(rep: EvalReport, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    p = out_dir / "report.txt"
    p.write_text(format_report(rep))
    paths.append(p)
    for t in TARGET_ORDER:
        p = out_dir / f"bland_altman_{t}.csv"
        p.write_text(format_bland_altman_csv(rep.bland_altman[t]))
        paths.append(p)
    p = out_dir / "report_tables.csv"
    p.write_text(format_tables_csv(rep.bhs, rep.stats, rep.aami))
    paths.append(p)
    return paths

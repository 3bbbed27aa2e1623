"""Subject-disjoint cross-validation on a small synthetic corpus.

A quick run with 20 subjects and 20 boosting rounds, so errors are far above those of
the 40-subject default run; use the CLI `evaluate` for that.

    python demos/cross_validate_small_corpus.py
"""

from pulsegrid import evaluation, features, synth
from pulsegrid.boost import BoostParams

recs, _ = synth.generate(synth.SynthConfig(n_subjects=20, seed=3))
ds = features.build_dataset(recs)
print(f"{len(ds)} beats from {len(set(ds.subjects))} subjects, {ds.X.shape[1]} samples per beat")

rep, cv = evaluation.evaluate(ds, k=5, seed=3, params=BoostParams(rounds=20))
print(f"PCA kept {min(cv.pca_dims)}..{max(cv.pca_dims)} components per fold")
print(evaluation.format_report(rep))

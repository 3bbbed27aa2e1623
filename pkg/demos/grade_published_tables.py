"""Re-grade the published BHS percentages and AAMI rows.

    python demos/grade_published_tables.py
"""

from pathlib import Path

from pulsegrid import cli, evaluation

bhs, aami = cli.parse_tables((Path(__file__).parent / "published_tables.csv").read_text())
for target, (p5, p10, p15) in bhs.items():
    print(f"BHS  {target}: {p5:g}/{p10:g}/{p15:g} -> grade {evaluation.grade_from_percentages(p5, p10, p15)}")
for target, st in aami.items():
    print(f"AAMI {target}: me {st.me:.3f} sd {st.sd:.3f} subjects {st.n_subjects} -> {evaluation.aami_check(st)}")

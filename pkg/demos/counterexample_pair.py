"""Two families whose conditioned laws agree on small trees only.

In the first family every vertex has either no children or the word
(type 1, type 2). The second family also allows (1, 1, 1, 1, 2), a word that
only fits in trees with at least four type-1 vertices. Conditioning on both
type counts separates the two once such trees exist, so no tilt relates them.
"""
from pathlib import Path

from bgwtilt import ConditionSpec, certify_equivalence, check_assumptions
from bgwtilt.io import load_model

HERE = Path(__file__).parent / "models"

zeta, _ = load_model(HERE / "pair_family.json")
zeta_tilde, _ = load_model(HERE / "pair_family_long_word.json")
both_counts = ConditionSpec.from_matrix([[1, 0], [0, 1]])

report = check_assumptions(zeta, both_counts.gamma_matrix)
print("assumption checks for the first family:")
for name, verdict in [("empty word", report.empty_word), ("escape", report.escape_verdict),
                      ("irreducible", report.irreducible)]:
    print(f"  {name}: {verdict.status}")

rep = certify_equivalence(zeta, both_counts, 8, other=zeta_tilde)
print(f"\nsupports agree: {rep.support_ok}")
print(f"verdict: {rep.verdict}")
for cell in rep.failing_cells()[:5]:
    counts = tuple(int(x) for x in cell.g)
    print(f"  root type {cell.root_type + 1}, type counts {counts}: {cell.note or cell.status}")

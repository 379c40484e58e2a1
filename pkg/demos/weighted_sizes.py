"""Criticalize a two-type family conditioned on a weighted size.

Type 2 vertices count double. The tilt that makes the family critical is
not a quadratic irrational here, so the check compares conditioned
probabilities in floating point.
"""
from pathlib import Path

from bgwtilt import apply_tilt, certify_equivalence, find_critical_tilting, is_good_tilting
from bgwtilt.io import load_model

model, cond = load_model(Path(__file__).parent / "models" / "two_type_weighted.json")
res = find_critical_tilting(model, cond)
print(f"b = {res.b}, beta = {res.beta:.10f}")
print(f"tilt respects the weights: {bool(is_good_tilting(res.params, cond))}")
print(f"spectral radius after tilting: {res.tilted_rho:.12f}")
print("tilted law of type 1:", {k: round(v, 6) for k, v in apply_tilt(model, res.params).projection[0].items()})
rep = certify_equivalence(model, cond, 9)
worst = max(float(c.max_deviation) for c in rep.cells if c.status != "skipped")
print(f"{len(rep.cells)} cells compared, worst deviation {worst:.2e}, verdict {rep.verdict}")

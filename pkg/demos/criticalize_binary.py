"""Walk through criticalizing a subcritical binary family.

Offspring law: 0 children with probability 2/3, 2 children with 1/3, so the
mean is 2/3. Trees conditioned on their size do not care about this: the
critical family found here produces exactly the same conditioned laws.
"""
from pathlib import Path

from bgwtilt import (
    ConditionSpec,
    apply_tilt,
    certify_equivalence,
    find_critical_tilting,
    mean_matrix,
    rationalize_tilt,
    spectral_radius,
)
from bgwtilt.io import load_model

HERE = Path(__file__).parent

model, cond = load_model(HERE / "models" / "subcritical_binary.json")
print(f"mean offspring before tilting: {spectral_radius(mean_matrix(model)):.6f}")

res = find_critical_tilting(model, cond)
print(f"curve traced with {len(res.trace.points)} points, crossing refined in {res.refinement_steps} steps")
print(f"float tilt: b = {res.b[0]:.12f}, beta = {res.beta:.12f}")

exact = rationalize_tilt(model, cond, res.params)
print(f"exact tilt: b = {exact.b[0]}, a = {exact.a[0]}, beta = {exact.beta}")

tilted = apply_tilt(model, exact)
print("tilted law:", {k: str(v) for k, v in tilted.projection[0].items()})
print(f"mean offspring after tilting: {spectral_radius(mean_matrix(tilted)):.12f}")

rep = certify_equivalence(model, cond, 11)
print(f"conditioned laws compared on sizes {[c.weighted_size for c in rep.cells]}: {rep.verdict}")

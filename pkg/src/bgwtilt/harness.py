"""End-to-end experiments: equivalence certification and local-limit measurement."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import spearmanr

from .critical import AssumptionError, criticalize, find_critical_tilting, is_critical
from .pgf import OffspringModel, check_assumptions, mean_matrix, spectral_radius, support_words
from .tilting import ConditionSpec, apply_tilt, rationalize_tilt
from .trees import (
    EnumerationBudgetError,
    achievable_weighted_sizes,
    ball,
    build_kesten_spec,
    enumerate_by_weighted_size,
    sample_conditioned,
    sample_kesten_ball,
    SamplerOptions,
    tree_weight,
)

SCHEMA = 1
FLOAT_EQUIV_TOL = 1e-10
CRITICAL_TOL = 1e-8


def _json_number(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return float(v)


def assert_critical(model: OffspringModel, tol: float = CRITICAL_TOL) -> float:
    rho = spectral_radius(mean_matrix(model))
    if abs(rho - 1.0) > tol:
        raise ValueError(f"expected a critical family, spectral radius is {rho!r}")
    return rho


# -- equivalence -----------------------------------------------------------------------

@dataclass
class EquivalenceCell:
    root_type: int
    weighted_size: int
    g: tuple | None
    status: str  # exact-pass | float-pass | fail | skipped
    max_deviation: float
    trees_model: int
    trees_other: int
    note: str = ""

    def as_dict(self):
        return {
            "root_type": self.root_type + 1,
            "weighted_size": self.weighted_size,
            "g": None if self.g is None else [_json_number(v) for v in self.g],
            "status": self.status,
            "max_deviation": self.max_deviation,
            "trees_model": self.trees_model,
            "trees_other": self.trees_other,
            "note": self.note,
        }


@dataclass
class EquivalenceReport:
    model_id: str
    gamma_matrix: tuple
    mode: str
    support_ok: bool
    support_note: str
    cells: list = field(default_factory=list)
    tilt: dict | None = None
    tilted_rho: float | None = None

    @property
    def verdict(self) -> str:
        if not self.support_ok or any(c.status == "fail" for c in self.cells):
            return "fail"
        done = [c for c in self.cells if c.status != "skipped"]
        if done and all(c.status == "exact-pass" for c in done):
            return "exact-pass"
        return "float-pass" if done else "skipped"

    @property
    def passed(self) -> bool:
        return self.verdict in ("exact-pass", "float-pass")

    def failing_cells(self):
        return [c for c in self.cells if c.status == "fail"]

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "kind": "equivalence",
            "model": self.model_id,
            "gamma_matrix": [[_json_number(v) for v in r] for r in self.gamma_matrix],
            "mode": self.mode,
            "support_condition": {"ok": self.support_ok, "note": self.support_note},
            "cells": [c.as_dict() for c in self.cells],
            "tilt": self.tilt,
            "tilted_rho": self.tilted_rho,
            "verdict": self.verdict,
        }


def _support_check(a: OffspringModel, b: OffspringModel):
    sa, sb = support_words(a), support_words(b)
    for t, (x, y) in enumerate(zip(sa, sb)):
        if x != y:
            diff = sorted(x ^ y)[0]
            return False, f"type {t + 1}: word {[v + 1 for v in diff]} is in only one support"
    return True, ""


def _cell_compare(seqs, root, laws_a, laws_b, exact):
    wa = [tree_weight(laws_a, root, s) for s in seqs]
    wb = [tree_weight(laws_b, root, s) for s in seqs]
    za, zb = sum(wa, start=0), sum(wb, start=0)
    na, nb = sum(1 for w in wa if w != 0), sum(1 for w in wb if w != 0)
    if za == 0 and zb == 0:
        return None
    if za == 0 or zb == 0:
        return "fail", float("inf"), na, nb, "target reachable under only one family"
    if exact:
        diffs = [x / za - y / zb for x, y in zip(wa, wb)]
        if all(d == 0 for d in diffs):
            return "exact-pass", 0.0, na, nb, ""
        return "fail", max(abs(float(d)) for d in diffs), na, nb, "conditioned laws differ"
    dev = max(abs(float(x) / float(za) - float(y) / float(zb)) for x, y in zip(wa, wb))
    return ("float-pass" if dev <= FLOAT_EQUIV_TOL else "fail"), dev, na, nb, ""


def certify_equivalence(model: OffspringModel, condition: ConditionSpec, max_weighted_size: int,
                        other: OffspringModel | None = None, node_budget: int = 2_000_000,
                        continuation=None) -> EquivalenceReport:
    """Compare conditioned tree laws of ``model`` and ``other`` (by default the
    critical good tilt of ``model``) on every target of weighted size up to
    ``max_weighted_size`` and every root type.

    The tilt is made exact in a quadratic field when possible; otherwise
    conditioned probabilities are compared to within ``1e-10``.
    """
    if model.exp_poly is not None:
        raise ValueError("certification enumerates trees; it needs a finite-support family")
    gamma = condition.require_reduced()
    tilt_info, tilted_rho = None, None
    if other is None:
        if is_critical(model):
            other = model
            tilt_info = {"identity": True}
        else:
            res = find_critical_tilting(model, condition, continuation)
            exact_params = rationalize_tilt(model, condition, res.params)
            params = exact_params if exact_params is not None else res.params
            other = apply_tilt(model, params)
            tilt_info = params.to_json()
            tilt_info["exact"] = [str(v) for v in params.b] if exact_params is not None else None
        tilted_rho = assert_critical(other)
    exact = model.is_exact and other.is_exact
    support_ok, note = _support_check(model, other)
    report = EquivalenceReport(model.name, condition.gamma_matrix, "exact" if exact else "float",
                               support_ok, note, tilt=tilt_info, tilted_rho=tilted_rho)
    laws_a, laws_b = model.ordered_law(), other.ordered_law()
    k = model.num_types
    rows = condition.gamma_matrix
    for root in range(k):
        try:
            by_size = enumerate_by_weighted_size([laws_a, laws_b], k, root, gamma, max_weighted_size, node_budget)
        except EnumerationBudgetError:
            by_size = None
        for s in range(1, max_weighted_size + 1):
            if by_size is None:
                report.cells.append(EquivalenceCell(root, s, None, "skipped", 0.0, 0, 0, "node budget exceeded"))
                continue
            cells = {}
            for seq in by_size.get(s, []):
                n = [0] * k
                n[root] += 1
                for w in seq:
                    for x in w:
                        n[x] += 1
                g = tuple(sum(Fraction(r[j]) * n[j] for j in range(k)) for r in rows)
                cells.setdefault(g, []).append(seq)
            for g in sorted(cells):
                out = _cell_compare(cells[g], root, laws_a, laws_b, exact)
                if out is None:
                    continue
                status, dev, na, nb, why = out
                report.cells.append(EquivalenceCell(root, s, g, status, dev, na, nb, why))
    return report


# -- local limit -------------------------------------------------------------------------

@dataclass
class LocalLimitCell:
    size: int
    achievable: bool
    samples: int = 0
    tv: float | None = None
    stderr: float | None = None
    attempts: int = 0

    def as_dict(self):
        return {
            "size": self.size,
            "achievable": self.achievable,
            "samples": self.samples,
            "tv": self.tv,
            "stderr": self.stderr,
            "attempts": self.attempts,
        }


@dataclass
class LocalLimitReport:
    radius: int
    root_type: int
    cells: list
    spearman: float | None
    strictly_decreasing: bool
    trend_pass: bool
    kesten_samples: int
    kesten_resamples: int = 0

    @property
    def tvs(self):
        return [c.tv for c in self.cells if c.achievable]

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "kind": "local_limit",
            "radius": self.radius,
            "root_type": self.root_type + 1,
            "cells": [c.as_dict() for c in self.cells],
            "spearman": self.spearman,
            "strictly_decreasing": self.strictly_decreasing,
            "trend_pass": self.trend_pass,
            "kesten_samples": self.kesten_samples,
            "kesten_resamples": self.kesten_resamples,
        }


def tv_with_bootstrap(xs, ys, rng, reps: int = 200):
    """Empirical TV between two samples of hashable outcomes and its bootstrap standard error."""
    labels = {v: i for i, v in enumerate(sorted(set(xs) | set(ys)))}
    a = np.fromiter((labels[v] for v in xs), dtype=np.int64, count=len(xs))
    b = np.fromiter((labels[v] for v in ys), dtype=np.int64, count=len(ys))
    m = len(labels)

    def tv(u, v):
        return 0.5 * float(np.abs(np.bincount(u, minlength=m) / len(u) - np.bincount(v, minlength=m) / len(v)).sum())

    est = tv(a, b)
    boots = [tv(a[rng.integers(0, len(a), len(a))], b[rng.integers(0, len(b), len(b))]) for _ in range(reps)]
    return est, float(np.std(boots, ddof=1)) if reps > 1 else 0.0


def trend_statistics(sizes, tvs):
    strictly = all(x > y for x, y in zip(tvs, tvs[1:])) if len(tvs) > 1 else False
    rho = None
    if len(tvs) >= 3 and len(set(tvs)) > 1:
        rho = float(spearmanr(sizes, tvs).statistic)
    passed = (rho is not None and rho <= -0.9) or (bool(tvs) and tvs[-1] < 0.05)
    return rho, strictly, passed


def _threads():
    try:
        return max(1, int(os.environ.get("BGWTILT_THREADS", "1")))
    except ValueError:
        return 1


def local_limit_experiment(model: OffspringModel, condition: ConditionSpec, root_type: int, radius: int,
                           sizes, samples_per_size: int, seed, bootstrap: int = 200,
                           sampler: SamplerOptions | None = None) -> LocalLimitReport:
    """Distance between the radius-``radius`` ball of a tree conditioned on
    weighted size ``k`` and the ball of the Kesten-like tree, for each ``k``.

    ``seed`` is an int or a ``numpy.random.SeedSequence``; every cell gets
    its own child stream, so results do not depend on the thread count
    (``BGWTILT_THREADS``).
    """
    if len(condition.gamma_matrix) != 1:
        raise ValueError("local-limit experiments condition on a single weighted size")
    report = check_assumptions(model, condition.gamma_matrix)
    # an already critical family needs no tilt, so the escape condition is moot
    needed = report.permits_criticalization if not is_critical(model) else (
        report.empty_word.ok and report.condition.ok)
    if not needed:
        raise AssumptionError("assumptions needed for criticalization fail", None)
    critical, _ = criticalize(model, condition)
    assert_critical(critical)
    spec = build_kesten_spec(critical)
    rows, _ = condition.integer_rows()
    row = [int(v) for v in rows[0]]
    sizes = [int(s) for s in sizes]
    reachable = set(achievable_weighted_sizes(critical, root_type, row, max(sizes))) if sizes else set()

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    kesten_ss, boot_ss, *cell_ss = ss.spawn(2 + len(sizes))
    boot_ss = boot_ss.spawn(len(sizes))
    krng = np.random.default_rng(kesten_ss)
    kesten = [sample_kesten_ball(spec, critical, root_type, radius, krng) for _ in range(samples_per_size)]
    kesten_balls = [b.tree.serialize() for b in kesten]
    opts = sampler or SamplerOptions()
    opts = SamplerOptions(**{**opts.__dict__, "criticalize": False})

    def run(idx):
        k = sizes[idx]
        if k not in reachable:
            return LocalLimitCell(k, False)
        rng = np.random.default_rng(cell_ss[idx])
        sample = sample_conditioned(critical, root_type, condition, (k,), rng, opts, n=samples_per_size)
        balls = [ball(t, radius).serialize() for t in sample.trees]
        tv, se = tv_with_bootstrap(balls, kesten_balls, np.random.default_rng(boot_ss[idx]), bootstrap)
        return LocalLimitCell(k, True, samples_per_size, tv, se, sample.attempts)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        cells = list(pool.map(run, range(len(sizes))))
    live = [c for c in cells if c.achievable]
    rho, strictly, passed = trend_statistics([c.size for c in live], [c.tv for c in live])
    return LocalLimitReport(radius, root_type, cells, rho, strictly, passed, samples_per_size,
                            sum(b.resamples for b in kesten))


__all__ = [
    "EquivalenceCell",
    "EquivalenceReport",
    "LocalLimitCell",
    "LocalLimitReport",
    "assert_critical",
    "certify_equivalence",
    "local_limit_experiment",
    "trend_statistics",
    "tv_with_bootstrap",
]

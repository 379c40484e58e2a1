"""Multitype offspring distributions and their generating functions.

Types are 0-based in the Python API (``0 .. K-1``). Model files and tree
serializations use 1-based type labels; conversion happens in :mod:`bgwtilt.io`.

Two parametric generating-function families are supported:

* ``polynomial``: finitely supported projection, ``phi_i(x) = sum_k mu_i(k) x**k``;
* ``exp_poly``: ``phi_i(x) = exp(f_i(x) - f_i(1))`` with ``f_i`` a polynomial with
  nonnegative coefficients (a compound Poisson law).
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product

import numpy as np

from .field import find_condition_vector, is_exact

FLOAT_SUM_TOL = 1e-9
_EXP_LIMIT = 709.0


class PGFOverflowError(OverflowError):
    """Raised when a generating function value leaves the float range."""

    def __init__(self, type_index, x):
        super().__init__(f"generating function of type {type_index} overflows at x={list(x)}")
        self.type_index = type_index
        self.x = tuple(x)


class SpectralRadiusError(ArithmeticError):
    def __init__(self, message, last_iterate):
        super().__init__(message)
        self.last_iterate = last_iterate


def project(ordered_law, num_types):
    """Forget the order of children: ``mu_i(k) = sum_{p(w)=k} zeta_i(w)``."""
    out = []
    for law in ordered_law:
        mu = defaultdict(int)
        for word, prob in law.items():
            mu[word_projection(word, num_types)] += prob
        out.append(dict(mu))
    return out


def word_projection(word, num_types):
    counts = [0] * num_types
    for letter in word:
        counts[letter] += 1
    return tuple(counts)


def multiset_orderings(counts):
    """All distinct words with the given type counts, in lexicographic order."""
    counts = list(counts)
    n = sum(counts)
    out = []

    def rec(prefix):
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        for j, c in enumerate(counts):
            if c:
                counts[j] -= 1
                prefix.append(j)
                rec(prefix)
                prefix.pop()
                counts[j] += 1

    rec([])
    return out


def canonical_ordering(projection):
    """Spread each ``mu_i(k)`` uniformly over the distinct orderings of ``k``."""
    out = []
    for mu in projection:
        zeta = {}
        for k, prob in mu.items():
            words = multiset_orderings(k)
            share = prob * Fraction(1, len(words)) if is_exact(prob) else prob / len(words)
            for w in words:
                zeta[w] = share
        out.append(zeta)
    return out


def _check_mass(total, what):
    if is_exact(total):
        if total != 1:
            raise ValueError(f"{what} has total mass {total}, expected 1")
    elif abs(float(total) - 1.0) > FLOAT_SUM_TOL:
        raise ValueError(f"{what} has total mass {float(total)!r}, expected 1")


@dataclass(frozen=True, eq=False)
class OffspringModel:
    """A K-type offspring family.

    Use :meth:`from_ordered`, :meth:`from_projection` or :meth:`from_exp_poly`.
    ``ordered`` maps words (tuples of 0-based types) to probabilities,
    ``projection`` maps count vectors to probabilities and ``exp_poly`` maps
    exponent vectors to the nonnegative coefficients of ``f_i``.
    """

    num_types: int
    ordered: tuple | None = None
    projection: tuple | None = None
    exp_poly: tuple | None = None
    name: str = field(default="", compare=False)

    @classmethod
    def from_ordered(cls, laws, name=""):
        laws = tuple({tuple(w): p for w, p in law.items() if p != 0} for law in laws)
        k = len(laws)
        return cls(k, ordered=laws, projection=tuple(project(laws, k)), name=name)

    @classmethod
    def from_projection(cls, laws, name=""):
        laws = tuple({tuple(c): p for c, p in law.items() if p != 0} for law in laws)
        return cls(len(laws), projection=laws, name=name)

    @classmethod
    def from_exp_poly(cls, polys, name=""):
        polys = tuple({tuple(e): c for e, c in poly.items() if c != 0} for poly in polys)
        return cls(len(polys), exp_poly=polys, name=name)

    def __post_init__(self):
        k = self.num_types
        if k < 1:
            raise ValueError("num_types must be >= 1")
        if self.exp_poly is not None:
            if len(self.exp_poly) != k:
                raise ValueError("need one polynomial per type")
            for i, poly in enumerate(self.exp_poly):
                for e, c in poly.items():
                    if len(e) != k or min(e) < 0:
                        raise ValueError(f"bad exponent {e} for type {i}")
                    if c < 0:
                        raise ValueError(f"negative coefficient {c} in f_{i}")
            return
        if self.projection is None:
            raise ValueError("model needs a projection, an ordered law or exp_poly")
        if len(self.projection) != k:
            raise ValueError("need one law per type")
        for i, mu in enumerate(self.projection):
            for c, p in mu.items():
                if len(c) != k or min(c, default=0) < 0:
                    raise ValueError(f"bad multi-index {c} for type {i}")
                if p < 0:
                    raise ValueError(f"negative probability for type {i}")
            _check_mass(sum(mu.values()), f"projection of type {i}")
        if self.ordered is not None:
            for i, zeta in enumerate(self.ordered):
                for w in zeta:
                    if any(not 0 <= a < k for a in w):
                        raise ValueError(f"word {w} of type {i} has a letter outside [0, {k})")
                _check_mass(sum(zeta.values()), f"ordered law of type {i}")

    @property
    def family(self) -> str:
        return "exp_poly" if self.exp_poly is not None else "polynomial"

    @property
    def is_exact(self) -> bool:
        if self.exp_poly is not None:
            return False
        return all(is_exact(p) for mu in self.projection for p in mu.values())

    @property
    def finite_support(self) -> bool:
        return self.exp_poly is None

    def ordered_law(self):
        """The ordered law, or the canonical ordering of the projection."""
        if self.ordered is not None:
            return self.ordered
        if self.projection is None:
            raise ValueError("exp_poly models have infinite support; no finite ordered law")
        return self._canonical

    @cached_property
    def _canonical(self):
        return tuple(canonical_ordering(self.projection))

    @cached_property
    def _tables(self):
        src = self.exp_poly if self.exp_poly is not None else self.projection
        tabs = []
        for poly in src:
            if poly:
                e = np.array(list(poly.keys()), dtype=np.int64).reshape(-1, self.num_types)
                c = np.array([float(v) for v in poly.values()])
            else:
                e = np.zeros((0, self.num_types), dtype=np.int64)
                c = np.zeros(0)
            tabs.append((e, c))
        return tabs

    @cached_property
    def _grad_tables(self):
        # d/dx_j of each polynomial as (lowered exponents, scaled coefficients)
        out = []
        for e, c in self._tables:
            rows = []
            for j in range(self.num_types):
                mask = e[:, j] > 0
                ee = e[mask].copy()
                ee[:, j] -= 1
                rows.append((ee, c[mask] * e[mask, j]))
            out.append(rows)
        return out

    @cached_property
    def _f_at_one(self):
        return [float(c.sum()) for _, c in self._tables]

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<OffspringModel{label} K={self.num_types} family={self.family}>"


def _monomials(e, x):
    # x may be one point (k,) or a batch (n, k)
    return np.prod(np.power(x[..., None, :], e), axis=-1)


def _poly_value(e, c, x):
    if len(c) == 0:
        return 0.0
    return float(_monomials(e, x) @ c)


def _poly_gradient(rows, x):
    g = np.zeros(len(x))
    for j, (ee, cc) in enumerate(rows):
        if len(cc):
            g[j] = float(_monomials(ee, x) @ cc)
    return g


def eval_pgf(model: OffspringModel, i: int, x) -> float:
    """``phi_i(x)`` in closed form. Raises :class:`PGFOverflowError` out of range."""
    x = np.asarray(x, dtype=float)
    e, c = model._tables[i]
    with np.errstate(over="ignore", invalid="ignore"):
        if model.exp_poly is not None:
            expo = _poly_value(e, c, x) - model._f_at_one[i]
            if not expo < _EXP_LIMIT:
                raise PGFOverflowError(i, x)
            return math.exp(expo)
        val = _poly_value(e, c, x)
    if not math.isfinite(val):
        raise PGFOverflowError(i, x)
    return val


def eval_pgf_gradient(model: OffspringModel, i: int, x) -> np.ndarray:
    """Exact partial derivatives ``d phi_i / d x_j`` at ``x``."""
    x = np.asarray(x, dtype=float)
    e, c = model._tables[i]
    with np.errstate(over="ignore", invalid="ignore"):
        g = _poly_gradient(model._grad_tables[i], x)
        if model.exp_poly is not None:
            g = g * eval_pgf(model, i, x)
    if not np.all(np.isfinite(g)):
        raise PGFOverflowError(i, x)
    return g


def eval_pgf_all(model, x):
    return np.array([eval_pgf(model, i, x) for i in range(model.num_types)])


def jacobian_pgf(model, x):
    """Matrix ``J[i, j] = d phi_i / d x_j (x)``."""
    return np.array([eval_pgf_gradient(model, i, x) for i in range(model.num_types)])


def eval_pgf_exact(model: OffspringModel, i: int, x):
    """Exact ``phi_i(x)`` for a polynomial model and exact ``x``."""
    if model.exp_poly is not None:
        raise ValueError("exact evaluation needs a polynomial family")
    total = 0
    for k, p in model.projection[i].items():
        term = p
        for xj, kj in zip(x, k):
            if kj:
                term = term * xj**kj
        total = total + term
    return total


def mean_matrix(model: OffspringModel, exact: bool = False):
    """``M[i, j]`` = expected number of type-j children of a type-i vertex."""
    k = model.num_types
    if exact:
        if not model.is_exact:
            raise ValueError("exact mean matrix needs exact probabilities")
        m = [[Fraction(0)] * k for _ in range(k)]
        for i, mu in enumerate(model.projection):
            for c, p in mu.items():
                for j in range(k):
                    if c[j]:
                        m[i][j] = m[i][j] + c[j] * p
        return m
    return jacobian_pgf(model, np.ones(k))


def spectral_radius(m, method: str = "auto", tol: float = 1e-13, max_iter: int | None = None) -> float:
    """Spectral radius of a nonnegative square matrix.

    Power iteration on ``M + I`` (primitive whenever ``M`` is irreducible, even
    periodic), accelerated by repeated squaring of the iteration matrix, stopped when the Collatz-Wielandt bracket
    ``min (Ax)_i/x_i <= rho <= max (Ax)_i/x_i`` is narrower than ``tol``.
    ``method="auto"`` falls back to a dense eigenvalue solver when the
    bracket does not close; ``method="power"`` raises instead.
    """
    a = np.asarray(m, dtype=float)
    n = a.shape[0]
    if n == 0:
        return 0.0
    if np.any(a < 0):
        raise ValueError("spectral_radius expects a nonnegative matrix")
    if method == "dense":
        return float(np.max(np.abs(np.linalg.eigvals(a))))
    if not a.any():
        return 0.0
    if max_iter is None:
        # each round squares the iterate, so 60 rounds cover 2**60 plain steps
        max_iter = 60
    shifted = a + np.eye(n)
    b = shifted / shifted.max()
    x = np.ones(n)
    lo = hi = 0.0
    for _ in range(max_iter):
        x = b.sum(axis=1)
        if x.min() > 0:
            ratios = (shifted @ x) / x
            lo, hi = ratios.min(), ratios.max()
            if hi - lo <= tol * max(1.0, hi):
                return float(0.5 * (lo + hi) - 1.0)
        b = b @ b
        top = b.max()
        if not top > 0 or not np.isfinite(top):
            break
        b /= top
    if method == "power":
        raise SpectralRadiusError(
            f"power iteration did not converge (bracket [{lo - 1}, {hi - 1}])", x
        )
    return float(np.max(np.abs(np.linalg.eigvals(a))))


def perron_vector(m, tol: float = 1e-14, max_iter: int = 100_000) -> np.ndarray:
    """Positive right Perron eigenvector of an irreducible nonnegative matrix,
    normalized so its first coordinate is 1."""
    a = np.asarray(m, dtype=float)
    n = a.shape[0]
    shifted = a + np.eye(n)
    x = np.ones(n)
    for _ in range(max_iter):
        y = shifted @ x
        y /= y[0] if y[0] > 0 else np.linalg.norm(y)
        if np.max(np.abs(y - x)) <= tol * np.max(np.abs(y)):
            x = y
            break
        x = y
    else:
        w, v = np.linalg.eig(a)
        x = np.abs(np.real(v[:, np.argmax(np.real(w))]))
    return x / x[0]


def support_digraph(m):
    a = np.asarray(m, dtype=float)
    return {i: {j for j in range(a.shape[0]) if a[i, j] > 0} for i in range(a.shape[0])}


def is_irreducible(m) -> bool:
    """Strong connectivity of the digraph ``i -> j`` iff ``M[i, j] > 0``."""
    graph = support_digraph(m)
    n = len(graph)
    for start in range(n):
        seen, stack = set(), [start]
        while stack:
            u = stack.pop()
            for v in graph[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != n:
            return False
    return True


def is_nondegenerate(model: OffspringModel) -> bool:
    """Some type has positive probability of a number of children other than 1."""
    if model.exp_poly is not None:
        return True  # mass e^{-f(1)} > 0 at the empty word
    return any(sum(c) != 1 for mu in model.projection for c, p in mu.items() if p > 0)


def empty_word_probability(model: OffspringModel, j: int):
    if model.exp_poly is not None:
        return eval_pgf(model, j, np.zeros(model.num_types))
    return model.projection[j].get((0,) * model.num_types, 0)


@dataclass(frozen=True)
class Verdict:
    status: str  # "pass" | "fail" | "undetermined"
    witness: object = None
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "pass"

    def as_dict(self):
        return {"status": self.status, "witness": _jsonable(self.witness), "note": self.note}


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [float(t) for t in v]
    if isinstance(v, (list, tuple)):
        return [_jsonable(t) for t in v]
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


@dataclass(frozen=True)
class AssumptionReport:
    entire: Verdict
    empty_word: Verdict
    escape: tuple
    condition: Verdict
    nondegenerate: Verdict
    irreducible: Verdict
    reduced_gamma: tuple | None = None

    @property
    def escape_verdict(self) -> Verdict:
        statuses = [v.status for v in self.escape]
        if "fail" in statuses:
            bad = next(v for v in self.escape if v.status == "fail")
            return Verdict("fail", bad.witness, bad.note)
        if "undetermined" in statuses:
            return Verdict("undetermined", None, "grid check inconclusive for some type")
        return Verdict("pass")

    @property
    def permits_criticalization(self) -> bool:
        return (
            self.empty_word.ok
            and self.condition.ok
            and self.escape_verdict.status != "fail"
        )

    def as_dict(self):
        return {
            "A1_entire": self.entire.as_dict(),
            "A2_empty_word": self.empty_word.as_dict(),
            "A3_escape": [v.as_dict() for v in self.escape],
            "B_condition": self.condition.as_dict(),
            "nondegenerate": self.nondegenerate.as_dict(),
            "irreducible": self.irreducible.as_dict(),
            "reduced_gamma": list(self.reduced_gamma) if self.reduced_gamma else None,
        }


def _escape_exp_poly(model, i):
    k = model.num_types
    for e, c in model.exp_poly[i].items():
        if c > 0 and e[i] >= 1 and all(e[j] == 0 for j in range(k) if j != i):
            return Verdict("pass", note=f"f_{i + 1} contains a pure power of x_{i + 1}")
    return None


def _escape_grid(model, i, bound, n_main=13, n_other=9):
    """Sample ``b_i d_i phi_i(b) - phi_i(b)`` on a grid; ``b_i`` up to ``bound``,
    the other coordinates up to ``bound**2``."""
    k = model.num_types
    main = np.geomspace(1.0, bound, n_main)
    others = np.concatenate([[0.0], np.geomspace(1e-2, bound**2, n_other)])
    holds = []
    witness = None
    combos = list(product(others, repeat=k - 1))
    rest = np.array(combos, dtype=float).reshape(len(combos), k - 1)
    e, c = model._tables[i]
    de, dc = model._grad_tables[i][i]
    for bi in main:
        pts = np.insert(rest, i, bi, axis=1)
        with np.errstate(over="ignore", invalid="ignore"):
            f = _monomials(e, pts) @ c if len(c) else np.zeros(len(pts))
            df = _monomials(de, pts) @ dc if len(dc) else np.zeros(len(pts))
            if model.exp_poly is not None:
                ef = np.exp(f - model._f_at_one[i])
                df, f = df * ef, ef
            val = bi * df - f
        fine = np.isfinite(val) & np.isfinite(f)
        bad = fine & (val < -1e-12 * np.maximum(1.0, f))
        if bad.any():
            witness = pts[np.argmax(bad)]
        holds.append(not bad.any())
    if not holds[-1]:
        return Verdict("fail", witness, f"inequality violated for type {i + 1} at b_{i + 1}={bound:g}")
    if all(holds[n_main // 2:]):
        return Verdict("pass", note=f"grid check for type {i + 1} up to {bound:g} (heuristic)")
    return Verdict("undetermined", note=f"grid check for type {i + 1} inconclusive")


def check_assumptions(model: OffspringModel, gamma_matrix, a3_bound: float = 1e3,
                      gamma_search_max: int = 10) -> AssumptionReport:
    """Evaluate the structural hypotheses needed for criticalization.

    ``gamma_matrix`` is a list of rows (a single row for a weighted-size
    conditioning).
    """
    k = model.num_types
    entire = Verdict("pass", note=f"{model.family} generating functions are entire")

    bad = [j for j in range(k) if not empty_word_probability(model, j) > 0]
    empty_word = Verdict("fail", bad[0] + 1, f"type {bad[0] + 1} never dies") if bad else Verdict("pass")

    escape = []
    for i in range(k):
        v = _escape_exp_poly(model, i) if model.exp_poly is not None else None
        escape.append(v if v is not None else _escape_grid(model, i, a3_bound))

    gamma = find_condition_vector(gamma_matrix, gamma_search_max)
    if gamma is None:
        condition = Verdict("fail", note="no positive integer vector with an entry 1 in (Ker Gamma)^perp")
    else:
        condition = Verdict("pass", list(gamma))

    nondeg = Verdict("pass") if is_nondegenerate(model) else Verdict("fail", note="every vertex has exactly one child")
    m = mean_matrix(model)
    irreducible = Verdict("pass") if is_irreducible(m) else Verdict("fail", note="support digraph of M not strongly connected")
    return AssumptionReport(entire, empty_word, tuple(escape), condition, nondeg, irreducible, gamma)


def support_words(model: OffspringModel):
    """Per-type sets of words with positive probability (finite families only)."""
    return [frozenset(w for w, p in law.items() if p > 0) for law in model.ordered_law()]

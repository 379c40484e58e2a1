"""Multitype plane trees: storage, exact enumeration, BGW sampling, conditioned
sampling by rejection, and balls of the Kesten-like tree with an infinite spine.

Trees are stored flat in depth-first preorder. A tree is determined by its
preorder sequence of ``(type, outdegree)`` pairs, which is also its serialized
form ``"t:d t:d ..."`` with 1-based types.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .field import is_exact
from .pgf import (
    OffspringModel,
    is_irreducible,
    mean_matrix,
    perron_vector,
    spectral_radius,
    word_projection,
)
from .tilting import ConditionSpec

DEFAULT_NODE_BUDGET = 2_000_000
DEFAULT_SIZE_CAP = 1_000_000


class EnumerationBudgetError(RuntimeError):
    """Raised when exhaustive enumeration would exceed its node budget.

    ``partial`` holds the trees found so far; they are never returned as if complete.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ConditionedSamplingError(RuntimeError):
    def __init__(self, message, attempts, accepted):
        super().__init__(message)
        self.attempts = attempts
        self.accepted = accepted

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempts if self.attempts else 0.0


# -- trees ------------------------------------------------------------------------

@dataclass(frozen=True)
class TypedTree:
    """Plane tree with types, in depth-first preorder (0-based types)."""

    types: tuple
    outdegrees: tuple

    def __post_init__(self):
        if len(self.types) != len(self.outdegrees) or not self.types:
            raise ValueError("types and outdegrees must be nonempty and of equal length")
        if sum(self.outdegrees) != len(self.types) - 1:
            raise ValueError("outdegrees do not describe a tree")
        # every proper prefix must leave pending nodes (Lukasiewicz path stays positive)
        pending = 1
        for d in self.outdegrees[:-1]:
            pending += d - 1
            if pending <= 0:
                raise ValueError("outdegrees do not describe a single tree in preorder")

    @classmethod
    def leaf(cls, t: int) -> "TypedTree":
        return cls((t,), (0,))

    def __len__(self):
        return len(self.types)

    @property
    def size(self) -> int:
        return len(self.types)

    @property
    def root_type(self) -> int:
        return self.types[0]

    @cached_property
    def parents(self) -> tuple:
        parents = [None] * len(self.types)
        stack = []  # (node, remaining children)
        for v, d in enumerate(self.outdegrees):
            if stack:
                u, rem = stack[-1]
                parents[v] = u
                if rem == 1:
                    stack.pop()
                else:
                    stack[-1] = (u, rem - 1)
            if d:
                stack.append((v, d))
        return tuple(parents)

    @cached_property
    def children(self) -> tuple:
        kids = [[] for _ in self.types]
        for v, p in enumerate(self.parents):
            if p is not None:
                kids[p].append(v)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def depths(self) -> tuple:
        depth = [0] * len(self.types)
        for v, p in enumerate(self.parents):
            if p is not None:
                depth[v] = depth[p] + 1
        return tuple(depth)

    @property
    def height(self) -> int:
        return max(self.depths)

    def type_counts(self, num_types: int) -> tuple:
        c = [0] * num_types
        for t in self.types:
            c[t] += 1
        return tuple(c)

    def words(self) -> tuple:
        """Ordered child-type word of every node, in preorder."""
        return tuple(tuple(self.types[c] for c in kids) for kids in self.children)

    def serialize(self) -> str:
        return " ".join(f"{t + 1}:{d}" for t, d in zip(self.types, self.outdegrees))

    @classmethod
    def from_serialized(cls, text: str) -> "TypedTree":
        types, outs = [], []
        for tok in text.split():
            t, d = tok.split(":")
            types.append(int(t) - 1)
            outs.append(int(d))
        return cls(tuple(types), tuple(outs))

    def neveu_addresses(self) -> tuple:
        """Ulam-Harris-Neveu addresses as tuples of 1-based child ranks."""
        addr = [()] * len(self.types)
        for u, kids in enumerate(self.children):
            for rank, v in enumerate(kids, 1):
                addr[v] = addr[u] + (rank,)
        return tuple(addr)

    def __str__(self):
        return self.serialize()


def ball(tree: TypedTree, radius: int) -> TypedTree:
    """Nodes at depth ``<= radius``; outdegrees at the boundary become 0."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    types, outs = [], []
    for t, d, h in zip(tree.types, tree.outdegrees, tree.depths):
        if h <= radius:
            types.append(t)
            outs.append(d if h < radius else 0)
    return TypedTree(tuple(types), tuple(outs))


def tree_from_words(root_type: int, word_seq) -> TypedTree:
    """Build a tree from the preorder sequence of offspring words."""
    types, outs = [], []
    stack = [root_type]
    for w in word_seq:
        t = stack.pop()
        types.append(t)
        outs.append(len(w))
        stack.extend(reversed(w))
    if stack:
        raise ValueError("word sequence leaves pending nodes")
    return TypedTree(tuple(types), tuple(outs))


# -- word samplers --------------------------------------------------------------

class _FiniteWords:
    """Inverse-CDF sampler over a finite ordered law, per type."""

    def __init__(self, laws, num_types):
        self.num_types = num_types
        self.words, self.cum = [], []
        for law in laws:
            ws = [w for w, p in law.items() if p > 0]
            ps = np.array([float(law[w]) for w in ws])
            if not ws:
                raise ValueError("a type has no offspring words")
            self.words.append(ws)
            c = np.cumsum(ps)
            self.cum.append(c / c[-1])

    def draw(self, t, rng) -> tuple:
        i = int(np.searchsorted(self.cum[t], rng.random(), side="right"))
        return self.words[t][min(i, len(self.words[t]) - 1)]


class _CompoundPoissonWords:
    """Words of an exp_poly family: independent Poisson counts per monomial,
    then a uniformly random ordering of the resulting multiset."""

    def __init__(self, model: OffspringModel, bias=None):
        self.num_types = model.num_types
        self.monomials, self.rates = [], []
        for poly in model.exp_poly:
            self.monomials.append(np.array(list(poly.keys()), dtype=np.int64).reshape(-1, model.num_types))
            self.rates.append(np.array([float(c) for c in poly.values()]))
        # size-biasing by the linear functional counts -> sum_j bias_j * counts_j
        self.bias = None if bias is None else np.asarray(bias, dtype=float)

    def draw(self, t, rng) -> tuple:
        mono, rate = self.monomials[t], self.rates[t]
        n = rng.poisson(rate) if len(rate) else np.zeros(0, dtype=np.int64)
        if self.bias is not None:
            w = rate * (mono @ self.bias)
            extra = rng.choice(len(rate), p=w / w.sum())
            n = n.copy()
            n[extra] += 1
        counts = n @ mono if len(rate) else np.zeros(self.num_types, dtype=np.int64)
        letters = np.repeat(np.arange(self.num_types), counts)
        rng.shuffle(letters)
        return tuple(int(x) for x in letters)


def _word_sampler(model: OffspringModel):
    if model.exp_poly is not None:
        return _CompoundPoissonWords(model)
    return _FiniteWords(model.ordered_law(), model.num_types)


# -- plain BGW sampling -----------------------------------------------------------

def sample_bgw(model: OffspringModel, root_type: int, rng, size_cap: int = DEFAULT_SIZE_CAP) -> TypedTree | None:
    """One BGW tree grown generation by generation; ``None`` once it exceeds ``size_cap`` nodes."""
    if size_cap < 1:
        raise ValueError("size_cap must be >= 1")
    sampler = _word_sampler(model)
    words = [None]
    types = [root_type]
    frontier = [0]
    while frontier:
        nxt = []
        for v in frontier:
            w = sampler.draw(types[v], rng)
            words[v] = w
            kids = []
            for t in w:
                types.append(t)
                words.append(None)
                kids.append(len(types) - 1)
            words[v] = (w, kids)
            nxt.extend(kids)
            if len(types) > size_cap:
                return None
        frontier = nxt
    # relabel to preorder
    order, stack = [], [0]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(reversed(words[v][1]))
    return TypedTree(tuple(types[v] for v in order), tuple(len(words[v][0]) for v in order))


# -- exact enumeration ------------------------------------------------------------

@dataclass
class WeightedEnsemble:
    """Trees satisfying ``Gamma N(T) = g`` with root ``root_type`` and their weights ``w(T)``."""

    root_type: int
    condition: ConditionSpec | None
    g: tuple
    trees: list = field(default_factory=list)
    weights: list = field(default_factory=list)

    @property
    def partition_function(self):
        return sum(self.weights, start=0) if self.weights else 0

    Z = partition_function

    def __len__(self):
        return len(self.trees)

    def probabilities(self) -> dict:
        """Conditioned law ``w(T)/Z`` keyed by serialized tree."""
        z = self.partition_function
        if not z:
            return {}
        return {t.serialize(): w / z for t, w in zip(self.trees, self.weights)}

    def csv_rows(self):
        for t, w in zip(self.trees, self.weights):
            if hasattr(w, "numerator") and hasattr(w, "denominator"):
                yield t.serialize(), str(w.numerator), str(w.denominator)
            elif is_exact(w):
                yield t.serialize(), str(w), "1"
            else:
                yield t.serialize(), repr(float(w)), "1"


def _word_table(model_or_laws, num_types):
    laws = model_or_laws.ordered_law() if isinstance(model_or_laws, OffspringModel) else model_or_laws
    table = []
    for law in laws:
        items = sorted((w for w, p in law.items() if p != 0), key=lambda w: (len(w), w))
        table.append([(w, np.array(word_projection(w, num_types), dtype=np.int64)) for w in items])
    return table


def _enumerate_word_sequences(table, root_type, rows, upper, accept, node_budget):
    """Depth-first enumeration of preorder word sequences.

    ``rows @ N <= upper`` prunes (rows with a negative entry never prune);
    ``accept(N)`` decides which complete trees are kept. ``N`` counts the
    nodes created so far, pending ones included.
    """
    k = len(table)
    prunable = np.all(rows >= 0, axis=1) if rows.size else np.zeros(0, dtype=bool)
    prow, pup = rows[prunable], upper[prunable]
    out = []
    seq = []
    stack = [root_type]
    counts = np.zeros(k, dtype=np.int64)
    counts[root_type] = 1
    if prow.size and np.any(prow @ counts > pup):
        return out
    expanded = 0

    def rec():
        nonlocal expanded
        if not stack:
            if accept(counts):
                out.append(tuple(seq))
            return
        t = stack.pop()
        for w, c in table[t]:
            counts[:] += c
            if not (prow.size and np.any(prow @ counts > pup)):
                expanded += 1
                if expanded > node_budget:
                    counts[:] -= c
                    stack.append(t)
                    raise EnumerationBudgetError(f"node budget {node_budget} exceeded", out)
                seq.append(w)
                stack.extend(reversed(w))
                rec()
                del stack[len(stack) - len(w):]
                seq.pop()
            counts[:] -= c
        stack.append(t)

    rec()
    return out


def tree_weight(laws, root_type, word_seq):
    """``w(T)``: product over nodes of the ordered-law probability of their word."""
    w = 1
    stack = [root_type]
    for word in word_seq:
        t = stack.pop()
        p = laws[t].get(word, 0)
        if p == 0:
            return 0
        w = w * p
        stack.extend(reversed(word))
    return w


def _int_condition(condition: ConditionSpec, g):
    rows, scales = condition.integer_rows()
    from fractions import Fraction

    g_scaled = [Fraction(v) * s for v, s in zip(g, scales)]
    if any(v.denominator != 1 for v in g_scaled):
        return rows, None
    return rows, np.array([int(v) for v in g_scaled], dtype=np.int64)


def enumerate_conditioned(model: OffspringModel, root_type: int, condition: ConditionSpec, g,
                          node_budget: int = DEFAULT_NODE_BUDGET) -> WeightedEnsemble:
    """All trees with root ``root_type`` and ``Gamma N(T) = g``, with exact weights.

    Raises :class:`EnumerationBudgetError` instead of truncating.
    """
    if model.exp_poly is not None:
        raise ValueError("exact enumeration needs a finite-support family")
    g = tuple(g)
    if len(g) != len(condition.gamma_matrix):
        raise ValueError("g must have one entry per row of Gamma")
    rows, g_int = _int_condition(condition, g)
    ens = WeightedEnsemble(root_type, condition, g)
    if g_int is None:
        return ens
    laws = model.ordered_law()
    table = _word_table(laws, model.num_types)
    seqs = _enumerate_word_sequences(
        table, root_type, rows, g_int, lambda n: bool(np.all(rows @ n == g_int)), node_budget
    )
    for s in seqs:
        ens.trees.append(tree_from_words(root_type, s))
        ens.weights.append(tree_weight(laws, root_type, s))
    return ens


def enumerate_by_weighted_size(laws_list, num_types, root_type, gamma, max_size,
                               node_budget: int = DEFAULT_NODE_BUDGET) -> dict:
    """All trees of weighted size ``gamma . N <= max_size`` whose words lie in the
    union of the supports of ``laws_list``; returns ``{size: [word sequences]}``."""
    union = []
    for t in range(num_types):
        merged = {}
        for laws in laws_list:
            for w, p in laws[t].items():
                if p != 0:
                    merged[w] = 1
        union.append(merged)
    table = _word_table(union, num_types)
    gam = np.array([list(gamma)], dtype=np.int64)
    seqs = _enumerate_word_sequences(
        table, root_type, gam, np.array([max_size]), lambda n: True, node_budget
    )
    by_size = {}
    for s in seqs:
        n = np.zeros(num_types, dtype=np.int64)
        n[root_type] += 1
        for w in s:
            for x in w:
                n[x] += 1
        by_size.setdefault(int(gam[0] @ n), []).append(s)
    return by_size


def achievable_weighted_sizes(model: OffspringModel, root_type: int, gamma, max_size: int) -> list:
    """Weighted sizes ``gamma . N(T) <= max_size`` reachable with positive
    probability from ``root_type`` (boolean fixed point over sumsets)."""
    k = model.num_types
    s = max_size
    if model.exp_poly is not None:
        gens = [[np.array(e) for e in poly] for poly in model.exp_poly]
        unbounded = True
    else:
        gens = [[np.array(c) for c, p in mu.items() if p > 0] for mu in model.projection]
        unbounded = False
    reach = [np.zeros(s + 1, dtype=bool) for _ in range(k)]

    def sumset(a, b):
        c = np.convolve(a.astype(np.int64), b.astype(np.int64))[: s + 1] > 0
        out = np.zeros(s + 1, dtype=bool)
        out[: len(c)] = c
        return out

    def children_set(counts):
        acc = np.zeros(s + 1, dtype=bool)
        acc[0] = True
        for j, cj in enumerate(counts):
            for _ in range(int(cj)):
                acc = sumset(acc, reach[j])
        return acc

    changed = True
    while changed:
        changed = False
        for t in range(k):
            if unbounded:
                acc = np.zeros(s + 1, dtype=bool)
                acc[0] = True
                while True:
                    new = acc.copy()
                    for e in gens[t]:
                        new |= sumset(acc, children_set(e))
                    if np.array_equal(new, acc):
                        break
                    acc = new
            else:
                acc = np.zeros(s + 1, dtype=bool)
                for c in gens[t]:
                    acc |= children_set(c)
            shifted = np.zeros(s + 1, dtype=bool)
            gt = int(gamma[t])
            if gt <= s:
                shifted[gt:] = acc[: s + 1 - gt]
            new = reach[t] | shifted
            if not np.array_equal(new, reach[t]):
                reach[t] = new
                changed = True
    return [int(v) for v in np.flatnonzero(reach[root_type])]


def size_period(sizes) -> int:
    """gcd of the differences between achievable sizes (0 when fewer than two)."""
    sizes = list(sizes)
    return math.gcd(*(b - sizes[0] for b in sizes[1:])) if len(sizes) > 1 else 0


# -- conditioned sampling -----------------------------------------------------------

@dataclass
class SamplerOptions:
    criticalize: bool = True
    max_attempts: int = 200_000_000
    batch_size: int = 1 << 16
    size_cap: int | None = None
    continuation: object = None


@dataclass
class ConditionedSample:
    trees: list
    attempts: int
    model: OffspringModel
    tilt: object = None

    @property
    def tree(self) -> TypedTree:
        return self.trees[0]

    @property
    def acceptance_rate(self) -> float:
        return len(self.trees) / self.attempts if self.attempts else 0.0


def _node_cap(rows, g_int, size_cap):
    caps = []
    for r, gv in zip(rows, g_int):
        if np.all(r > 0):
            caps.append(int(gv // r.min()))
    cap = min(caps) if caps else DEFAULT_SIZE_CAP
    if size_cap is not None:
        cap = min(cap, size_cap)
    return max(cap, 1)


def _batch_rejection(model, root_type, rows, g_int, n_wanted, rng, opts):
    """Rejection in bulk, one generation per round.

    All pending type-t vertices of a tree draw their words at once as a
    multinomial count, so only count vectors are tracked; a tree is dropped
    as soon as a nonnegative row of ``Gamma N`` passes its target. Accepted
    trees are rebuilt afterwards by assigning each generation's recorded
    word multiset to that generation's vertices in uniformly random order,
    which reproduces the i.i.d. per-vertex draws exactly.
    """
    laws = model.ordered_law()
    k = model.num_types
    words, probs, wc = [], [], []
    for law in laws:
        ws = [w for w, p in law.items() if p > 0]
        p = np.array([float(law[w]) for w in ws])
        words.append(ws)
        probs.append(p / p.sum())
        wc.append(np.array([word_projection(w, k) for w in ws], dtype=np.int64).reshape(-1, k))
    cap = _node_cap(rows, g_int, opts.size_cap)
    prunable = np.all(rows >= 0, axis=1)
    out, attempts = [], 0
    while len(out) < n_wanted:
        if attempts >= opts.max_attempts:
            raise ConditionedSamplingError(
                f"attempt cap {opts.max_attempts} reached with {len(out)} accepted", attempts, len(out)
            )
        b = int(min(opts.batch_size, opts.max_attempts - attempts))
        n = np.zeros((b, k), dtype=np.int64)
        n[:, root_type] = 1
        pending = n.copy()
        accepted = np.zeros(b, dtype=bool)
        history = []
        active = np.arange(b)
        w0 = rows @ n[0]
        if np.any((w0 > g_int) & prunable) or 1 > cap:
            active = active[:0]
        while active.size:
            pa = pending[active]
            fresh = np.zeros_like(pa)
            draws = []
            for t in range(k):
                d = rng.multinomial(pa[:, t], probs[t])
                fresh += d @ wc[t]
                draws.append(d)
            history.append((active, draws))
            n[active] += fresh
            pending[active] = fresh
            w = n[active] @ rows.T
            over = np.any((w > g_int) & prunable, axis=1) | (n[active].sum(axis=1) > cap)
            done = fresh.sum(axis=1) == 0
            accepted[active[done & ~over & np.all(w == g_int, axis=1)]] = True
            active = active[~(over | done)]
        idx = np.flatnonzero(accepted)
        need = n_wanted - len(out)
        if idx.size > need:
            idx = idx[:need]
            attempts += int(idx[-1]) + 1
        else:
            attempts += b
        for i in idx:
            out.append(_rebuild(root_type, i, history, words, rng))
    return out, attempts


def _rebuild(root_type, i, history, words, rng):
    types = [root_type]
    kids = [[]]
    generation = [0]
    for act, draws in history:
        pos = int(np.searchsorted(act, i))
        if pos >= act.size or act[pos] != i:
            break
        assigned = {}
        for t, d in enumerate(draws):
            members = [v for v in generation if types[v] == t]
            if not members:
                continue
            pool = np.repeat(np.arange(d.shape[1]), d[pos])
            rng.shuffle(pool)
            for v, wi in zip(members, pool):
                assigned[v] = words[t][wi]
        nxt = []
        for v in generation:
            for x in assigned[v]:
                types.append(x)
                kids.append([])
                kids[v].append(len(types) - 1)
                nxt.append(len(types) - 1)
        generation = nxt
    order, stack = [], [0]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(reversed(kids[v]))
    return TypedTree(tuple(types[v] for v in order), tuple(len(kids[v]) for v in order))


def _scalar_rejection(model, root_type, rows, g_int, n_wanted, rng, opts):
    cap = _node_cap(rows, g_int, opts.size_cap)
    out, attempts = [], 0
    while len(out) < n_wanted:
        if attempts >= opts.max_attempts:
            raise ConditionedSamplingError(
                f"attempt cap {opts.max_attempts} reached with {len(out)} accepted", attempts, len(out)
            )
        attempts += 1
        tree = sample_bgw(model, root_type, rng, cap)
        if tree is not None and np.all(rows @ np.array(tree.type_counts(model.num_types)) == g_int):
            out.append(tree)
    return out, attempts


def sample_conditioned(model: OffspringModel, root_type: int, condition: ConditionSpec, g, rng,
                       opts: SamplerOptions | None = None, n: int = 1) -> ConditionedSample:
    """``n`` independent trees conditioned on ``Gamma N(T) = g`` by rejection.

    With ``opts.criticalize`` the model is first replaced by its critical good
    tilt, which has the same conditioned laws.
    """
    from .critical import criticalize

    opts = opts or SamplerOptions()
    tilt = None
    if opts.criticalize:
        model, tilt = criticalize(model, condition, opts.continuation)
    rows, g_int = _int_condition(condition, tuple(g))
    if g_int is None:
        raise ConditionedSamplingError("target is not reachable by any integer count vector", 0, 0)
    if model.exp_poly is None:
        trees, attempts = _batch_rejection(model, root_type, rows, g_int, n, rng, opts)
    else:
        trees, attempts = _scalar_rejection(model, root_type, rows, g_int, n, rng, opts)
    return ConditionedSample(trees, attempts, model, tilt)


# -- Kesten-like tree -----------------------------------------------------------------

@dataclass(frozen=True)
class KestenSpec:
    r: tuple
    zeta_hat: tuple | None  # per type {word: prob}; None for infinite-support families
    rho: float

    def spine_child_probabilities(self, word) -> np.ndarray:
        w = np.array([self.r[x] for x in word], dtype=float)
        return w / w.sum()


def build_kesten_spec(model: OffspringModel, tol: float = 1e-8, eig_tol: float = 1e-10) -> KestenSpec:
    """Perron vector ``r`` (``r_1 = 1``) and the size-biased family
    ``zeta_hat_j(w) = sum_l r_{w_l} / r_j * zeta_j(w)``."""
    m = mean_matrix(model)
    rho = spectral_radius(m)
    if abs(rho - 1.0) > tol:
        raise ValueError(f"model is not critical: spectral radius {rho!r}")
    if not is_irreducible(m):
        raise ValueError(f"model is reducible (spectral radius {rho!r})")
    r = perron_vector(m)
    if np.max(np.abs(m @ r - r)) > eig_tol:
        raise ValueError(f"M r = r fails: residual {np.max(np.abs(m @ r - r))!r}")
    hat = None
    if model.exp_poly is None:
        hat = []
        for j, law in enumerate(model.ordered_law()):
            hat.append({w: sum(r[x] for x in w) / r[j] * float(p) for w, p in law.items() if w and p})
        hat = tuple(hat)
    return KestenSpec(tuple(float(v) for v in r), hat, rho)


@dataclass
class KestenBall:
    tree: TypedTree
    spine: tuple  # preorder indices of spine vertices inside the ball
    resamples: int = 0


def sample_kesten_ball(spec: KestenSpec, model: OffspringModel, root_type: int, radius: int, rng,
                       size_cap: int = DEFAULT_SIZE_CAP) -> KestenBall:
    """Ball of radius ``radius`` around the root of the Kesten-like tree.

    Off-spine subtrees are grown only down to the ball boundary, which has
    the same law as growing them fully and truncating.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    plain = _word_sampler(model)
    if spec.zeta_hat is not None:
        spine_words = _FiniteWords(spec.zeta_hat, model.num_types)
    else:
        spine_words = _CompoundPoissonWords(model, bias=spec.r)
    resamples = 0
    types, outs, spine = [], [], []

    def grow(t, depth_left, budget):
        # preorder lists for a BGW subtree cut at depth_left
        stack = [(t, depth_left)]
        sub_t, sub_o = [], []
        while stack:
            tt, dl = stack.pop()
            if dl == 0:
                sub_t.append(tt)
                sub_o.append(0)
                continue
            w = plain.draw(tt, rng)
            sub_t.append(tt)
            sub_o.append(len(w))
            if len(sub_t) + len(stack) + len(w) > budget:
                return None
            stack.extend((x, dl - 1) for x in reversed(w))
        return sub_t, sub_o

    def graft(t, depth_left):
        nonlocal resamples
        while True:
            sub = grow(t, depth_left, size_cap)
            if sub is not None:
                return sub
            resamples += 1

    def spine_node(t, depth):
        spine.append(len(types))
        types.append(t)
        if depth == radius:
            outs.append(0)
            return
        w = spine_words.draw(t, rng)
        outs.append(len(w))
        pick = int(rng.choice(len(w), p=spec.spine_child_probabilities(w)))
        for idx, x in enumerate(w):
            if idx == pick:
                spine_node(x, depth + 1)
            else:
                st, so = graft(x, radius - depth - 1)
                types.extend(st)
                outs.extend(so)

    spine_node(root_type, 0)
    return KestenBall(TypedTree(tuple(types), tuple(outs)), tuple(spine), resamples)


def empirical_law(serialized) -> dict:
    c = Counter(serialized)
    n = sum(c.values())
    return {k: v / n for k, v in c.items()}


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(float(p.get(x, 0)) - float(q.get(x, 0))) for x in keys)


__all__ = [
    "ConditionedSample",
    "ConditionedSamplingError",
    "EnumerationBudgetError",
    "KestenBall",
    "KestenSpec",
    "SamplerOptions",
    "TypedTree",
    "WeightedEnsemble",
    "achievable_weighted_sizes",
    "ball",
    "build_kesten_spec",
    "empirical_law",
    "enumerate_by_weighted_size",
    "enumerate_conditioned",
    "sample_bgw",
    "sample_conditioned",
    "sample_kesten_ball",
    "size_period",
    "total_variation",
    "tree_from_words",
    "tree_weight",
]

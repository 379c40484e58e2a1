import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bgwtilt.pgf import (
    OffspringModel,
    PGFOverflowError,
    SpectralRadiusError,
    canonical_ordering,
    check_assumptions,
    eval_pgf,
    eval_pgf_all,
    eval_pgf_exact,
    eval_pgf_gradient,
    is_irreducible,
    mean_matrix,
    perron_vector,
    project,
    spectral_radius,
)
from suite import pair_family, poisson, random_model, subcritical_binary, suite, two_type_exp_poly


def test_project_merges_orderings():
    assert project([{(): F(1, 2), (0, 1): F(1, 2)}], 2) == [{(0, 0): F(1, 2), (1, 1): F(1, 2)}]
    assert project([{(0, 1): F(1, 2), (1, 0): F(1, 2)}], 2) == [{(1, 1): F(1)}]
    assert project([{(): F(1)}, {(): F(1)}], 2) == [{(0, 0): F(1)}, {(0, 0): F(1)}]


def test_canonical_ordering_is_uniform():
    (law,) = canonical_ordering([{(1, 1): F(1)}])
    assert law == {(0, 1): F(1, 2), (1, 0): F(1, 2)}
    (law,) = canonical_ordering([{(2, 0): F(1)}])
    assert law == {(0, 0): F(1)}
    (law,) = canonical_ordering([{(2, 1): F(1)}])
    assert law == {(0, 0, 1): F(1, 3), (0, 1, 0): F(1, 3), (1, 0, 0): F(1, 3)}


@st.composite
def projections(draw):
    k = draw(st.integers(1, 3))
    laws = []
    for _ in range(k):
        keys = draw(st.lists(st.tuples(*[st.integers(0, 2)] * k), min_size=1, max_size=4, unique=True))
        weights = draw(st.lists(st.integers(1, 9), min_size=len(keys), max_size=len(keys)))
        total = sum(weights)
        laws.append({c: F(w, total) for c, w in zip(keys, weights)})
    return k, laws


@given(projections())
def test_projection_of_canonical_ordering_is_identity(data):
    k, laws = data
    assert project(canonical_ordering(laws), k) == laws


def test_invalid_laws_rejected():
    with pytest.raises(ValueError):
        OffspringModel.from_projection([{(0,): F(1, 2), (2,): F(1, 3)}])
    with pytest.raises(ValueError):
        OffspringModel.from_projection([{(0,): F(3, 2), (2,): F(-1, 2)}])
    with pytest.raises(ValueError):
        OffspringModel.from_exp_poly([{(1,): -1.0}])


def test_pgf_values():
    m = subcritical_binary()
    assert eval_pgf(m, 0, [2.0]) == pytest.approx(2.0, abs=1e-14)
    assert eval_pgf_exact(m, 0, [F(2)]) == 2
    assert eval_pgf(poisson(2.0), 0, [0.0]) == pytest.approx(math.exp(-2), rel=1e-14)
    for _, model, _ in suite():
        assert np.allclose(eval_pgf_all(model, np.ones(model.num_types)), 1.0, atol=1e-12)


def test_pgf_gradients_closed_form():
    m = subcritical_binary()
    assert eval_pgf_gradient(m, 0, [2**0.5])[0] == pytest.approx(2 * 2**0.5 / 3, rel=1e-14)
    lam, x = 2.0, 0.7
    assert eval_pgf_gradient(poisson(lam), 0, [x])[0] == pytest.approx(lam * math.exp(lam * (x - 1)), rel=1e-13)


def test_overflow_is_signalled():
    with pytest.raises(PGFOverflowError):
        eval_pgf(poisson(2.0), 0, [1e308])
    with pytest.raises(PGFOverflowError):
        eval_pgf(subcritical_binary(), 0, [1e200])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    models = [random_model(rng, int(rng.integers(1, 4))), two_type_exp_poly()]
    h = 1e-5
    for model in models:
        k = model.num_types
        for _ in range(5):
            x = rng.uniform(0, 2, size=k)
            for i in range(k):
                g = eval_pgf_gradient(model, i, x)
                for j in range(k):
                    e = np.zeros(k)
                    e[j] = h
                    fd = (eval_pgf(model, i, x + e) - eval_pgf(model, i, x - e)) / (2 * h)
                    assert abs(fd - g[j]) <= 1e-6 * max(1.0, abs(g[j]))


def test_mean_matrices():
    leaf = OffspringModel.from_ordered([{(): F(1)}, {(): F(1)}])
    assert np.array_equal(mean_matrix(leaf), np.zeros((2, 2)))
    assert mean_matrix(pair_family(), exact=True) == [[F(1, 2), F(1, 2)], [F(1, 2), F(1, 2)]]
    crit = OffspringModel.from_projection([{(0,): F(1, 2), (2,): F(1, 2)}])
    assert mean_matrix(crit)[0, 0] == pytest.approx(1.0)
    for _, model, _ in suite():
        jac = np.array([eval_pgf_gradient(model, i, np.ones(model.num_types)) for i in range(model.num_types)])
        assert np.allclose(mean_matrix(model), jac)


def test_spectral_radius_examples():
    assert spectral_radius(np.diag([2.0, 3.0])) == pytest.approx(3.0, abs=1e-12)
    assert spectral_radius([[0, 1], [1, 0]]) == pytest.approx(1.0, abs=1e-12)
    assert spectral_radius([[0.5, 0.5], [0.5, 0.5]]) == pytest.approx(1.0, abs=1e-12)
    assert spectral_radius(np.zeros((3, 3))) == 0.0
    with pytest.raises(ValueError):
        spectral_radius([[-1.0]])


def test_power_mode_reports_failure_on_reducible_input():
    # decoupled types: the ratio bracket stays [1, 2] forever
    with pytest.raises(SpectralRadiusError):
        spectral_radius(np.diag([1.0, 2.0]), method="power")
    assert spectral_radius(np.diag([1.0, 2.0])) == pytest.approx(2.0)
    assert spectral_radius([[0.0, 1.0], [0.0, 0.0]]) == pytest.approx(0.0, abs=1e-12)


matrices = st.integers(1, 5).flatmap(
    lambda n: st.lists(st.lists(st.floats(0, 3), min_size=n, max_size=n), min_size=n, max_size=n)
)


@given(matrices, st.randoms())
def test_spectral_radius_against_dense_and_permutation(rows, rnd):
    a = np.array(rows)
    dense = float(np.max(np.abs(np.linalg.eigvals(a))))
    rho = spectral_radius(a)
    assert abs(rho - dense) <= 1e-9 * max(1.0, dense)
    perm = list(range(len(a)))
    rnd.shuffle(perm)
    assert abs(spectral_radius(a[np.ix_(perm, perm)]) - rho) <= 1e-9 * max(1.0, rho)


@given(matrices, st.data())
def test_spectral_radius_is_monotone(rows, data):
    a = np.array(rows)
    i = data.draw(st.integers(0, len(a) - 1))
    j = data.draw(st.integers(0, len(a) - 1))
    b = a.copy()
    b[i, j] += data.draw(st.floats(0, 2))
    assert spectral_radius(b) >= spectral_radius(a) - 1e-9 * max(1.0, spectral_radius(a))


def test_perron_vector_and_irreducibility():
    m = np.array([[0.5, 0.25], [1.0, 0.5]])
    r = perron_vector(m)
    assert r[0] == 1.0
    assert np.allclose(m @ r, spectral_radius(m) * r, atol=1e-12)
    assert is_irreducible(m)
    assert not is_irreducible([[1.0, 1.0], [0.0, 1.0]])


def test_assumption_report_on_pair_family():
    rep = check_assumptions(pair_family(), [[1, 1]])
    assert rep.empty_word.ok
    assert rep.irreducible.ok
    assert rep.entire.ok
    assert rep.condition.ok


def test_empty_word_failure_names_the_type():
    m = OffspringModel.from_projection([{(1, 1): F(1)}, {(0, 0): F(1, 2), (1, 1): F(1, 2)}])
    rep = check_assumptions(m, [[1, 1]])
    assert rep.empty_word.status == "fail"
    assert rep.empty_word.witness == 1
    assert not rep.permits_criticalization


def test_escape_failure_has_witness():
    # phi(b1, b2) = (1 + b1 + b2) / 3 for both types
    law = {(0, 0): F(1, 3), (1, 0): F(1, 3), (0, 1): F(1, 3)}
    rep = check_assumptions(OffspringModel.from_projection([dict(law), dict(law)]), [[1, 1]])
    assert rep.escape_verdict.status == "fail"
    bad = [v for v in rep.escape if v.status == "fail"][0]
    assert bad.witness is not None


def test_escape_passes_for_exp_poly_with_pure_powers():
    rep = check_assumptions(two_type_exp_poly(), [[1, 1]])
    assert rep.escape_verdict.status == "pass"


def test_condition_b_fails_without_positive_vector():
    rep = check_assumptions(pair_family(), [[1, -1]])
    assert not rep.condition.ok

from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bgwtilt import ConditionSpec, OffspringModel, apply_tilt, mean_matrix, spectral_radius
from bgwtilt.critical import (
    AssumptionError,
    ContinuationOptions,
    NoCrossingError,
    criticalize,
    find_critical_tilting,
    g_functions,
    g_jacobian,
    h_functions_and_charts,
    identity_is_on_curve,
    seed_near_origin,
    taylor_seed,
    trace_curve,
)
from bgwtilt.pgf import eval_pgf_all
from bgwtilt.tilting import curve_residual, is_good_tilting
from suite import (
    critical_binary,
    pair_family,
    poisson,
    random_model,
    subcritical_binary,
    symmetric_critical_two_type,
    three_type,
    two_type,
    two_type_exp_poly,
)

G1 = ConditionSpec.from_gamma([1])
G11 = ConditionSpec.from_gamma([1, 1])
G12 = ConditionSpec.from_gamma([1, 2])


def test_g_vanishes_at_origin_and_is_empty_for_one_type():
    assert np.allclose(g_functions(two_type(), G12, np.zeros(2)), 0.0)
    assert np.allclose(g_functions(three_type(), ConditionSpec.from_gamma([1, 2, 1]), np.zeros(3)), 0.0)
    assert g_functions(subcritical_binary(), G1, [0.7]).shape == (0,)


def test_g_for_unit_weights():
    m = two_type()
    b = np.array([0.4, 1.3])
    phi = eval_pgf_all(m, b)
    assert g_functions(m, G11, b)[0] == pytest.approx(b[1] * phi[0] - b[0] * phi[1], abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_g_jacobian_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 4))
    m = random_model(rng, k)
    cond = ConditionSpec.from_gamma([1] + [int(x) for x in rng.integers(1, 3, size=k - 1)])
    b = rng.uniform(0.1, 2.0, size=k)
    jac = g_jacobian(m, cond, b)
    h = 1e-6
    for j in range(k):
        e = np.zeros(k)
        e[j] = h
        fd = (g_functions(m, cond, b + e) - g_functions(m, cond, b - e)) / (2 * h)
        assert np.allclose(fd, jac[:, j], rtol=1e-6, atol=1e-7)


def test_h_antisymmetric_and_equal_to_g_for_unit_weights():
    rng = np.random.default_rng(50)
    m = three_type()
    cond = ConditionSpec.from_gamma([1, 2, 1])
    for _ in range(50):
        b = rng.uniform(0.05, 3.0, size=3)
        h = h_functions_and_charts(m, cond, b).h
        assert np.allclose(h, -h.T, atol=1e-13)
    b = np.array([0.3, 0.9])
    h = h_functions_and_charts(two_type(), G11, b).h
    assert h[0, 1] == pytest.approx(g_functions(two_type(), G11, b)[0], abs=1e-14)


@pytest.mark.parametrize("model,gamma", [(three_type(), [1, 2, 1]), (two_type_exp_poly(), [1, 2])])
def test_chart_jacobians_match_finite_differences(model, gamma):
    cond = ConditionSpec.from_gamma(gamma)
    k = model.num_types
    rng = np.random.default_rng(7)
    step = 1e-6
    for _ in range(10):
        b = rng.uniform(0.2, 2.0, size=k)
        data = h_functions_and_charts(model, cond, b)
        for i in range(k):
            idx = [j for j in range(k) if j != i]
            for col, m in enumerate(idx):
                e = np.zeros(k)
                e[m] = step
                up = h_functions_and_charts(model, cond, b + e).h
                down = h_functions_and_charts(model, cond, b - e).h
                fd = (up[i, idx] - down[i, idx]) / (2 * step)
                assert np.allclose(fd, data.charts[i][:, col], rtol=1e-6, atol=1e-8)


def test_nonpositive_coordinates_rejected_by_h():
    with pytest.raises(ValueError):
        h_functions_and_charts(two_type(), G11, [0.0, 1.0])


def test_seed_examples():
    assert seed_near_origin(subcritical_binary(), G1, 1e-3)[0] == 1e-3
    half = F(1, 2)
    m = OffspringModel.from_projection([{(0, 0): half, (2, 0): half}, {(0, 0): half, (0, 2): half}])
    assert taylor_seed(m, G11, 1e-3) == pytest.approx([1e-3, 1e-3])
    b = seed_near_origin(two_type(), G12, 1e-3)
    assert np.max(np.abs(g_functions(two_type(), G12, b))) <= 1e-12


def test_binary_trace_follows_closed_form():
    trace = trace_curve(subcritical_binary(), G1)
    assert trace.termination == "crossing"
    for p in trace.points:
        b = p.b[0]
        assert p.rho_tilde == pytest.approx(2 * b * b / (2 + b * b), rel=1e-10)
    rhos = [p.rho_tilde for p in trace.points]
    assert all(x < y for x, y in zip(rhos, rhos[1:]))
    i = trace.crossings[0]
    assert trace.points[i].b[0] < 2**0.5 <= trace.points[i + 1].b[0]


@pytest.mark.parametrize("model,cond", [(two_type(), G12), (three_type(), ConditionSpec.from_gamma([1, 1, 1])),
                                        (two_type_exp_poly(), G11)])
def test_trace_points_are_on_curve_and_avoid_faces(model, cond):
    opts = ContinuationOptions(stop_at_crossing=False, domain_bound=50.0)
    trace = trace_curve(model, cond, opts)
    for p in trace.points:
        assert np.max(np.abs(curve_residual(model, cond, np.array(p.b)))) <= 1e-9
        assert not (min(p.b) < 1e-10 and max(p.b) > 1e-3)
        assert p.rho_tilde >= 0


def test_rho_tilde_jumps_shrink_with_the_step():
    def max_jump(step):
        opts = ContinuationOptions(max_step=step, domain_bound=20.0, stop_at_crossing=False)
        rhos = [p.rho_tilde for p in trace_curve(two_type(), G12, opts).points]
        return max(abs(x - y) for x, y in zip(rhos, rhos[1:]))

    assert max_jump(0.025) < max_jump(0.1)


def test_critical_tilts():
    res = find_critical_tilting(subcritical_binary(), G1)
    assert res.b[0] == pytest.approx(2**0.5, abs=1e-8)
    res = find_critical_tilting(poisson(2.0), G1)
    assert res.b[0] == pytest.approx(0.5, abs=1e-8)
    tilted = apply_tilt(poisson(2.0), res.params)
    assert tilted.exp_poly[0][(1,)] == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("model,cond", [(two_type(), G11), (two_type(), G12), (three_type(), ConditionSpec.from_gamma([1, 2, 1]))])
def test_critical_output_is_good_and_critical(model, cond):
    res = find_critical_tilting(model, cond)
    assert is_good_tilting(res.params, cond)
    assert abs(spectral_radius(mean_matrix(apply_tilt(model, res.params))) - 1) <= 1e-8
    assert abs(res.rho_tilde - 1) <= 1e-9


def test_already_critical_models():
    for model, cond in [(critical_binary(), G1), (symmetric_critical_two_type(), G11)]:
        out, res = criticalize(model, cond)
        assert res is None and out is model
        assert identity_is_on_curve(model, cond)
    res = find_critical_tilting(critical_binary(), G1)
    assert res.b[0] == pytest.approx(1.0, abs=1e-6)


def test_escape_failure_stops_before_tracing():
    law = {(0, 0): F(1, 3), (1, 0): F(1, 3), (0, 1): F(1, 3)}
    m = OffspringModel.from_projection([dict(law), dict(law)])
    with pytest.raises(AssumptionError):
        find_critical_tilting(m, G11)
    # forced through, the curve leaves the box without reaching criticality
    with pytest.raises(NoCrossingError) as info:
        find_critical_tilting(m, G11, ContinuationOptions(allow_escape_failure=True, domain_bound=100.0))
    assert info.value.trace is not None and info.value.trace.points


def test_missing_empty_word_is_fatal():
    m = OffspringModel.from_projection([{(1, 1): F(1)}, {(0, 0): F(1, 2), (1, 1): F(1, 2)}])
    with pytest.raises(AssumptionError):
        trace_curve(m, G11)


def test_pair_family_is_left_alone():
    out, res = criticalize(pair_family(), G11)
    assert res is None
    assert out.projection == pair_family().projection

import json

import numpy as np
import pytest

from bgwtilt import ConditionSpec, certify_equivalence, local_limit_experiment
from bgwtilt.harness import assert_critical, trend_statistics, tv_with_bootstrap
from suite import (
    critical_binary,
    pair_family,
    pair_family_long_word,
    subcritical_binary,
    symmetric_critical_two_type,
    two_type,
)

G1 = ConditionSpec.from_gamma([1])
EYE = ConditionSpec.from_matrix([[1, 0], [0, 1]])


def test_identity_certification():
    rep = certify_equivalence(critical_binary(), G1, 9)
    assert rep.verdict == "exact-pass"
    assert rep.tilt == {"identity": True}


def test_binary_certification_is_exact():
    rep = certify_equivalence(subcritical_binary(), G1, 9)
    assert rep.verdict == "exact-pass"
    assert rep.tilt["exact"] == ["0 + 1*sqrt(2)"]
    assert [c.weighted_size for c in rep.cells] == [1, 3, 5, 7, 9]
    assert all(c.max_deviation == 0 for c in rep.cells)


def test_counterexample_pair_fails():
    rep = certify_equivalence(pair_family(), EYE, 8, other=pair_family_long_word())
    assert rep.verdict == "fail"
    assert not rep.support_ok
    assert rep.failing_cells()


def test_float_mode_when_tilt_is_not_quadratic():
    rep = certify_equivalence(two_type(), ConditionSpec.from_gamma([1, 2]), 7)
    assert rep.passed
    assert all(c.max_deviation <= 1e-10 for c in rep.cells)


def test_budget_exhaustion_marks_cells_skipped():
    rep = certify_equivalence(subcritical_binary(), G1, 15, node_budget=50)
    assert rep.verdict == "skipped"
    assert {c.status for c in rep.cells} == {"skipped"}


def test_reports_are_deterministic():
    a = json.dumps(certify_equivalence(subcritical_binary(), G1, 7).to_json(), sort_keys=True)
    b = json.dumps(certify_equivalence(subcritical_binary(), G1, 7).to_json(), sort_keys=True)
    assert a == b
    run = lambda: json.dumps(  # noqa: E731
        local_limit_experiment(critical_binary(), G1, 0, 2, [9, 11], 500, seed=3, bootstrap=20).to_json(),
        sort_keys=True,
    )
    assert run() == run()


def test_radius_zero_gives_zero_distance():
    rep = local_limit_experiment(critical_binary(), G1, 0, 0, [5, 9], 300, seed=1, bootstrap=10)
    assert rep.tvs == [0.0, 0.0]


def test_unachievable_size_is_reported_not_fatal():
    rep = local_limit_experiment(critical_binary(), G1, 0, 1, [4, 9], 200, seed=1, bootstrap=10)
    assert [c.achievable for c in rep.cells] == [False, True]
    assert rep.to_json()["cells"][0]["tv"] is None


def test_thread_count_does_not_change_results(monkeypatch):
    args = (symmetric_critical_two_type(), ConditionSpec.from_gamma([1, 1]), 0, 2, [6, 10], 400)
    monkeypatch.setenv("BGWTILT_THREADS", "1")
    one = local_limit_experiment(*args, seed=5, bootstrap=20).to_json()
    monkeypatch.setenv("BGWTILT_THREADS", "3")
    three = local_limit_experiment(*args, seed=5, bootstrap=20).to_json()
    assert one == three


def test_subcritical_input_is_tilted_first():
    rep = local_limit_experiment(subcritical_binary(), G1, 0, 1, [9], 300, seed=2, bootstrap=10)
    assert 0.0 <= rep.tvs[0] <= 1.0


@pytest.mark.slow
def test_tv_estimate_is_consistent_when_doubling_samples():
    args = (symmetric_critical_two_type(), ConditionSpec.from_gamma([1, 1]), 0, 1, [20])
    small = local_limit_experiment(*args, 2000, seed=11).cells[0]
    large = local_limit_experiment(*args, 4000, seed=11).cells[0]
    se = max(small.stderr, large.stderr)
    assert abs(small.tv - large.tv) < 3 * se


def test_tv_bootstrap_and_trend():
    rng = np.random.default_rng(0)
    tv, se = tv_with_bootstrap(["a"] * 50 + ["b"] * 50, ["a"] * 100, rng, reps=50)
    assert tv == pytest.approx(0.5)
    assert 0 < se < 0.2
    rho, strictly, passed = trend_statistics([1, 2, 3], [0.3, 0.2, 0.1])
    assert rho == pytest.approx(-1.0) and strictly and passed
    rho, strictly, passed = trend_statistics([1, 2, 3], [0.0, 0.0, 0.0])
    assert not strictly and passed  # final distance below the threshold
    _, _, passed = trend_statistics([1, 2, 3], [0.1, 0.2, 0.3])
    assert not passed


def test_assert_critical():
    assert assert_critical(critical_binary()) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        assert_critical(subcritical_binary())

from __future__ import annotations

import pytest

from shapecredit import theory
from shapecredit.trajectory import ConfigError, ShapingConfig


def test_table_rows():
    rows = {g: f for g, _, _, f in theory.reproduce_gamma_table()}
    assert rows[1.0] == 0.250 and rows[0.8] == 0.075 and rows[0.6] == -0.100
    assert theory.check_gamma_table().passed


def test_critical_gamma():
    assert theory.critical_gamma(7 / 8, 1) == 0.875
    assert theory.critical_gamma(0, 0.4) == 0
    assert theory.critical_gamma(0.5, 0.5) == 1.0
    with pytest.raises(ValueError):
        theory.critical_gamma(0.5, 0)


def test_sign_enumeration():
    assert len(theory.improving_pairs(8)) == 36
    assert theory.sign_consistency(0.9)["non_positive"] == []
    assert (5 / 8, 7 / 8) in theory.sign_consistency(0.7)["non_positive"]
    assert theory.check_sign_consistency().passed


def test_fuzz_bounds():
    r = theory.fuzz_task_consistency(20_000, 1, ShapingConfig())
    assert r["violations"] == 0
    assert r["min_correct"] >= 0.7 and r["max_incorrect"] <= 0.3


def test_fuzz_margin_near_boundary():
    r = theory.fuzz_task_consistency(5_000, 2, ShapingConfig(alpha=0.49))
    assert r["margin"] >= 0.02 - 1e-9


def test_fuzz_rejects_alpha():
    # a valid config cannot hold alpha >= 0.5, so pass a stand-in
    class Fake:
        alpha, m_rollouts, l_ref, gamma_min = 0.6, 8, 512, 0.9
    with pytest.raises(ConfigError):
        theory.fuzz_task_consistency(10, 0, Fake())


def test_fuzz_deterministic():
    c = ShapingConfig()
    assert theory.fuzz_task_consistency(1000, 7, c) == theory.fuzz_task_consistency(1000, 7, c)


def test_derivatives():
    e_phi, e_len = theory.derivative_check(1000, seed=3)
    assert e_phi < 1e-6 and e_len < 1e-6
    with pytest.raises(ValueError):
        theory.derivative_check(1, step=0.1)


def test_analytic_slopes():
    # dF/dL closed form at phi_next = 1
    h = 1e-4
    f = lambda L: theory.shaping_term(0.3, 1.0, theory.dynamic_gamma(L, 512, 0.9))  # noqa: E731
    assert (f(100 + h) - f(100 - h)) / (2 * h) == pytest.approx(-0.1 / 512, rel=1e-6)
    assert (f(900 + h) - f(900 - h)) / (2 * h) == pytest.approx(0.0, abs=1e-12)


def test_run_suite():
    reps = theory.run_suite("all", trials=2000)
    assert [r.name for r in reps] == ["gamma-table", "sign", "consistency", "derivatives"]
    assert all(r.passed for r in reps)
    with pytest.raises(ValueError):
        theory.run_suite("nope")

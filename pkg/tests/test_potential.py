from __future__ import annotations

import importlib

import pytest
from hypothesis import given
from hypothesis import strategies as st

from shapecredit.potential import (
    LogOracle,
    OracleError,
    build_profile,
    estimate_potential,
    get_oracle,
)
from shapecredit.trajectory import PotentialSource, SegmentPlan, ShapingConfig, TrajectoryRecord

REC = TrajectoryRecord.from_entropies("r", [0.1] * 12, 1)


def seeded(hits):
    """Oracle succeeding exactly on the given seeds."""
    return lambda record, boundary, seed: int(seed in hits)


def test_three_of_eight():
    assert estimate_potential(REC, 4, seeded({10, 12, 17}), 8, 10) == 0.375


def test_always_fail_and_succeed():
    assert estimate_potential(REC, 0, lambda *a: 0, 8, 0) == 0.0
    assert estimate_potential(REC, 0, lambda *a: 1, 1, 0) == 1.0


def test_seed_range_used():
    seen = []
    estimate_potential(REC, 2, lambda r, b, s: seen.append(s) or 0, 4, 100)
    assert seen == [100, 101, 102, 103]


def test_oracle_failure_message():
    def boom(*a):
        raise RuntimeError("down")
    with pytest.raises(OracleError, match="oracle unavailable at boundary 3"):
        estimate_potential(REC, 3, boom, 8, 0)


def test_boundary_range():
    with pytest.raises(ValueError):
        estimate_potential(REC, 13, lambda *a: 1, 1, 0)


@given(st.sets(st.integers(0, 15)), st.integers(1, 8))
def test_parallel_matches_serial(hits, workers):
    o = seeded(hits)
    assert estimate_potential(REC, 1, o, 16, 0, max_workers=workers) == estimate_potential(REC, 1, o, 16, 0)


def cfg(**kw):
    return ShapingConfig(**kw)


def test_profile_from_log():
    r = TrajectoryRecord.from_entropies("r", [0.1] * 9, 1, boundary_potentials=[0, .25, .5, 1])
    p = build_profile(r, SegmentPlan((3, 6)), None, cfg())
    assert p.values == (0, .25, .5, 1) and p.source is PotentialSource.LOG


def test_terminal_overwrite():
    r = TrajectoryRecord.from_entropies("r", [0.1] * 9, 0, boundary_potentials=[0, .25, .5, 1])
    assert build_profile(r, SegmentPlan((3, 6)), None, cfg()).values == (0, .25, .5, 0)


def test_constant_oracle_profile():
    p = build_profile(REC, SegmentPlan((6,)), lambda *a: 1, cfg(m_rollouts=8))
    assert p.values == (1, 1, 1) and p.source is PotentialSource.ORACLE
    assert p.terminal_source is PotentialSource.TERMINAL_OUTCOME


def test_boundary_seed_blocks():
    calls = []
    build_profile(REC, SegmentPlan((4, 8)), lambda r, b, s: calls.append((b, s)) or 0,
                  cfg(m_rollouts=2), seed=10)
    assert calls == [(0, 10), (0, 11), (4, 12), (4, 13), (8, 14), (8, 15)]


def test_no_source():
    with pytest.raises(ValueError, match="no potential source"):
        build_profile(REC, SegmentPlan(()), None, cfg())


def test_log_length_mismatch():
    r = TrajectoryRecord.from_entropies("r", [0.1] * 9, 1, boundary_potentials=[0, 1])
    with pytest.raises(ValueError, match="expected 4"):
        build_profile(r, SegmentPlan((3, 6)), None, cfg())


def test_registry():
    assert isinstance(get_oracle("log"), LogOracle)
    importlib.import_module("shapecredit.simulator")  # registers "simulator"
    assert get_oracle("simulator")(REC.__class__.from_entropies(
        "s", [1] * 8, 1, meta={"stage_starts": [0], "progress": [8, 8]}), 8, 0) in (0, 1)
    with pytest.raises(ValueError, match="unknown oracle"):
        get_oracle("nope")
    with pytest.raises(OracleError):
        estimate_potential(REC, 0, LogOracle(), 1, 0)


@given(st.integers(0, 1000), st.integers(1, 12))
def test_grid_and_determinism(seed, m):
    o = lambda r, b, s: (s * 2654435761 >> 7) & 1  # noqa: E731
    v = estimate_potential(REC, 5, o, m, seed)
    assert v * m == int(v * m) and 0 <= v <= 1
    assert v == estimate_potential(REC, 5, o, m, seed)

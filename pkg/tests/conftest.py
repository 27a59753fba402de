from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from shapecredit.trajectory import ShapingConfig, TrajectoryRecord  # noqa: E402


@pytest.fixture
def cfg() -> ShapingConfig:
    return ShapingConfig(tau=1.5, k_segments=3)


@pytest.fixture
def fixture_record() -> TrajectoryRecord:
    """Three segments of unequal length with logged potentials and varied entropies."""
    ent = [0.2, 0.4, 0.3,            # seg 0: 3 tokens
           2.6, 0.1, 0.9, 0.5, 0.2, 0.7, 0.3, 0.6, 0.4, 0.8,   # seg 1: 10 tokens
           2.9, 0.5, 0.1, 0.6]      # seg 2: 4 tokens
    return TrajectoryRecord.from_entropies(
        "fx", ent, 1, group_id="g", boundary_potentials=[0.25, 0.5, 0.75, 1.0])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        terminalreporter.write_line(results[key])

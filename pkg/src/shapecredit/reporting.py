"""Transition-level reports: centered gain regression and gain distribution by starting potential."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .trajectory import TrajectoryRecord

Transition = tuple[float, float, int]  # (phi_k, gain, outcome)

FLOOR_GAIN = -0.24
GAIN_EPS = 0.03
BINS = (
    ("low", (0, 1)),
    ("mid_low", (2, 3)),
    ("mid_high", (4, 5)),
    ("high", (6, 7)),
)


@dataclass(frozen=True)
class GroupFit:
    slope: float
    raw_intercept: float
    centered_intercept: float
    n: int


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise ValueError("degenerate group: zero variance in gain")
    slope = float(xc @ (y - y.mean())) / sxx
    return slope, float(y.mean() - slope * x.mean())


def _fit(points: list[Transition], name: str) -> GroupFit:
    if len(points) < 2:
        raise ValueError(f"{name} group has {len(points)} points after filtering; need >= 2")
    x = np.array([p[1] for p in points], dtype=float)
    y = np.array([p[2] for p in points], dtype=float)
    _, b0 = _ols(x, y)
    slope, b0c = _ols(x, y - b0)
    return GroupFit(slope=slope, raw_intercept=b0, centered_intercept=b0c, n=len(points))


def split_groups(transitions: Iterable[Transition], threshold_low: float = 0.25,
                 threshold_high: float = 0.5) -> tuple[list[Transition], list[Transition]]:
    """Low-start and high-start groups; the low group drops floor-effect transitions."""
    low, high = [], []
    for t in transitions:
        phi, gain, _ = t
        if phi <= threshold_low:
            if not (phi <= 0.25 and gain <= FLOOR_GAIN):
                low.append(t)
        elif phi >= threshold_high:
            high.append(t)
    return low, high


def gain_regression(transitions: Iterable[Transition], threshold_low: float = 0.25,
                    threshold_high: float = 0.5) -> dict[str, GroupFit]:
    """OLS slope of outcome on gain per group, after centering each group by its raw intercept.

    Centering shifts the outcome only, so the slope equals the raw OLS slope
    and the centered intercept is zero up to rounding.
    """
    if threshold_low >= threshold_high:
        raise ValueError("threshold_low must be below threshold_high")
    low, high = split_groups(transitions, threshold_low, threshold_high)
    return {"low": _fit(low, "low"), "high": _fit(high, "high")}


def bin_of(phi: float, m: int = 8) -> str | None:
    level = round(phi * m)
    for name, levels in BINS:
        if level in levels:
            return name
    return None  # terminal-level starts cannot gain


def mean_gains(transitions: Iterable[Transition], m: int = 8) -> dict[str, float]:
    """Mean raw gain per start bin; empty bins count as 0."""
    sums = {name: 0.0 for name, _ in BINS}
    counts = dict.fromkeys(sums, 0)
    seen = 0
    for phi, gain, _ in transitions:
        seen += 1
        b = bin_of(phi, m)
        if b is None:
            continue
        sums[b] += gain
        counts[b] += 1
    if not seen:
        raise ValueError("no transitions")
    return {b: (sums[b] / counts[b] if counts[b] else 0.0) for b in sums}


def gain_distribution(transitions: Iterable[Transition], eps: float = GAIN_EPS,
                      global_min: float | None = None, m: int = 8) -> dict[str, float]:
    """Percentage share of each start bin after a floor shift by ``global_min - eps``."""
    means = mean_gains(transitions, m)
    gmin = min(means.values()) if global_min is None else global_min
    shifted = {b: g - (gmin - eps) for b, g in means.items()}
    total = sum(shifted.values())
    return {b: 100.0 * v / total for b, v in shifted.items()}


def gain_distributions(methods: Mapping[str, Sequence[Transition]], eps: float = GAIN_EPS,
                       m: int = 8) -> dict[str, dict[str, float]]:
    """Distributions for several methods sharing one global minimum mean gain."""
    means = {name: mean_gains(ts, m) for name, ts in methods.items()}
    gmin = min(v for bins in means.values() for v in bins.values())
    return {name: gain_distribution(ts, eps, gmin, m) for name, ts in methods.items()}


def record_transitions(records: Iterable[TrajectoryRecord]) -> list[Transition]:
    """Adjacent boundary pairs from records with logged potentials."""
    out = []
    for rec in records:
        pots = rec.boundary_potentials
        if pots is None:
            continue
        for a, b in zip(pots, pots[1:]):
            out.append((a, b - a, int(rec.outcome)))
    return out


def stride_records(records: Iterable[TrajectoryRecord], stride: int) -> list[TrajectoryRecord]:
    """Keep every ``stride``-th batch, where a batch is a run of records sharing a ``group_id``."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    out, batch, last = [], -1, object()
    for rec in records:
        key = rec.group_id if rec.group_id is not None else ("__solo", rec.id)
        if key != last:
            batch += 1
            last = key
        if batch % stride == 0:
            out.append(rec)
    return out

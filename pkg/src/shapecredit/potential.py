"""Boundary potential estimation from rollouts or logged values."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Protocol

from .trajectory import (
    PotentialProfile,
    PotentialSource,
    SegmentPlan,
    ShapingConfig,
    TrajectoryRecord,
)


class OracleError(RuntimeError):
    pass


class RolloutOracle(Protocol):
    """Binary success indicator for one forced completion of a prefix.

    Must be deterministic in ``(record, boundary, seed)``.
    """

    def __call__(self, record: TrajectoryRecord, boundary: int, seed: int) -> int: ...


def estimate_potential(
    record: TrajectoryRecord,
    boundary: int,
    oracle: RolloutOracle,
    m: int,
    seed: int,
    *,
    max_workers: int | None = None,
) -> float:
    """Mean of ``m`` oracle draws using seeds ``seed .. seed + m - 1``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0 <= boundary <= record.token_count:
        raise ValueError(f"boundary {boundary} outside trajectory of {record.token_count} tokens")

    def draw(s: int) -> int:
        try:
            r = int(oracle(record, boundary, s))
        except Exception as exc:
            raise OracleError(f"oracle unavailable at boundary {boundary}") from exc
        if r not in (0, 1):
            raise OracleError(f"oracle returned non-binary value {r} at boundary {boundary}")
        return r

    seeds = range(seed, seed + m)
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            hits = list(pool.map(draw, seeds))
    else:
        hits = [draw(s) for s in seeds]
    # integer count keeps the value exactly on the 1/m grid
    return sum(hits) / m


def build_profile(
    record: TrajectoryRecord,
    plan: SegmentPlan,
    oracle: RolloutOracle | None,
    config: ShapingConfig,
    *,
    seed: int = 0,
    max_workers: int | None = None,
) -> PotentialProfile:
    """Potentials at the start of each segment plus the terminal outcome.

    Logged ``boundary_potentials`` take priority over the oracle. Each
    boundary gets its own seed block ``seed + k*m .. seed + (k+1)*m - 1``.
    """
    k = plan.k
    m = config.m_rollouts
    if record.boundary_potentials is not None:
        logged = record.boundary_potentials
        if len(logged) != k + 1:
            raise ValueError(f"record {record.id}: {len(logged)} logged potentials for K={k} "
                             f"(expected {k + 1})")
        values = list(logged[:k])
        source = PotentialSource.LOG
    elif oracle is not None:
        values = [
            estimate_potential(record, b, oracle, m, seed + i * m, max_workers=max_workers)
            for i, b in enumerate(plan.starts())
        ]
        source = PotentialSource.ORACLE
    else:
        raise ValueError("no potential source")
    values.append(float(record.outcome))
    return PotentialProfile(values=tuple(values), m=m, source=source)


class LogOracle:
    """Passthrough oracle: only valid for records carrying logged potentials.

    Calling it means the logged values were missing, so it always fails.
    """

    def __call__(self, record: TrajectoryRecord, boundary: int, seed: int) -> int:
        raise OracleError(f"record {record.id} has no logged potentials")


ORACLES: dict[str, Callable[[], RolloutOracle | None]] = {}


def register_oracle(name: str, factory: Callable[[], RolloutOracle | None]) -> None:
    ORACLES[name] = factory


def get_oracle(name: str) -> RolloutOracle | None:
    try:
        factory = ORACLES[name]
    except KeyError:
        raise ValueError(f"unknown oracle {name!r}; choose from {sorted(ORACLES)}") from None
    return factory()


register_oracle("log", LogOracle)

"""Core record types shared across the package.

Everything here is a frozen dataclass holding tuples, so instances can be
passed between threads and hashed freely. Construction does not validate
record contents: bad data is reported by :func:`validate` as a list of
violations rather than raised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Any, Mapping, Sequence

GRID_TOL = 1e-9


class ConfigError(ValueError):
    """Raised when a ShapingConfig violates its constraints."""


class Estimator(str, Enum):
    SHAPE = "shape"
    MRT = "mrt"
    GRPO = "grpo"


class PotentialSource(str, Enum):
    ORACLE = "oracle"
    LOG = "log"
    TERMINAL_OUTCOME = "terminal-outcome"


@dataclass(frozen=True)
class TokenInfo:
    index: int
    entropy: float
    text: str | None = None
    valid: bool = True


@dataclass(frozen=True)
class TrajectoryRecord:
    id: str
    tokens: tuple[TokenInfo, ...]
    outcome: int
    group_id: str | None = None
    boundary_potentials: tuple[float, ...] | None = None
    meta: Mapping[str, Any] = field(default_factory=dict, compare=False)

    @property
    def token_count(self) -> int:
        return len(self.tokens)

    @property
    def entropies(self) -> list[float]:
        return [t.entropy for t in self.tokens]

    @classmethod
    def from_entropies(
        cls,
        id: str,
        entropies: Sequence[float],
        outcome: int,
        *,
        group_id: str | None = None,
        boundary_potentials: Sequence[float] | None = None,
        valid: Sequence[bool] | None = None,
        meta: Mapping[str, Any] | None = None,
    ) -> "TrajectoryRecord":
        flags = list(valid) if valid is not None else [True] * len(entropies)
        tokens = tuple(
            TokenInfo(index=i, entropy=float(h), valid=bool(v))
            for i, (h, v) in enumerate(zip(entropies, flags))
        )
        bp = None if boundary_potentials is None else tuple(float(x) for x in boundary_potentials)
        return cls(id=id, tokens=tokens, outcome=outcome, group_id=group_id,
                   boundary_potentials=bp, meta=dict(meta or {}))


@dataclass(frozen=True)
class SegmentPlan:
    """Interior boundary indices; boundary ``b`` is the first token of a new segment."""

    boundaries: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.boundaries) + 1

    def starts(self) -> list[int]:
        return [0, *self.boundaries]

    def spans(self, token_count: int) -> list[tuple[int, int]]:
        edges = [0, *self.boundaries, token_count]
        return list(zip(edges[:-1], edges[1:]))

    def check(self, token_count: int) -> None:
        b = self.boundaries
        if any(x >= y for x, y in zip(b, b[1:])):
            raise ValueError(f"boundaries not strictly increasing: {list(b)}")
        if b and (b[0] <= 0 or b[-1] >= token_count):
            raise ValueError(f"boundaries {list(b)} not interior to {token_count} tokens")


@dataclass(frozen=True)
class PotentialProfile:
    """Potentials Phi(s_1)..Phi(s_K) followed by the terminal value.

    ``source`` describes where the first K entries came from; the terminal
    entry is always the realized outcome.
    """

    values: tuple[float, ...]
    m: int
    source: PotentialSource

    @property
    def k(self) -> int:
        return len(self.values) - 1

    @property
    def terminal_source(self) -> PotentialSource:
        return PotentialSource.TERMINAL_OUTCOME


@dataclass(frozen=True)
class ShapingConfig:
    alpha: float = 0.3
    gamma_min: float = 0.9
    l_ref: int = 512
    k_segments: int = 8
    m_rollouts: int = 8
    tau: float | None = None
    beta: float = 0.5
    delta_min: float = 0.5
    delta_max: float = 1.5
    epsilon: float = 1e-6
    # ablation / open-question switches
    fixed_gamma: float | None = None
    tcr: bool = True
    outcome_mode: str = "raw"
    min_gap: int | None = None

    def __post_init__(self) -> None:
        problems = self.violations()
        if problems:
            raise ConfigError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if not 0.0 < self.alpha < 0.5:
            out.append(f"alpha={self.alpha} must satisfy 0 < alpha < 0.5 "
                       "(task consistency requires alpha < 0.5)")
        if not 0.0 < self.gamma_min < 1.0:
            out.append(f"gamma_min={self.gamma_min} must lie in (0, 1)")
        if int(self.l_ref) != self.l_ref or self.l_ref <= 0:
            out.append(f"l_ref={self.l_ref} must be a positive integer")
        if self.k_segments < 1:
            out.append(f"k_segments={self.k_segments} must be >= 1")
        if self.m_rollouts < 1:
            out.append(f"m_rollouts={self.m_rollouts} must be >= 1")
        if self.tau is not None and not math.isfinite(self.tau):
            out.append("tau must be finite")
        if self.beta < 0:
            out.append(f"beta={self.beta} must be non-negative")
        if not 0.0 < self.delta_min <= 1.0 <= self.delta_max:
            out.append(f"need 0 < delta_min <= 1 <= delta_max, got "
                       f"[{self.delta_min}, {self.delta_max}]")
        if self.epsilon <= 0:
            out.append("epsilon must be positive")
        if self.fixed_gamma is not None and not 0.0 < self.fixed_gamma <= 1.0:
            out.append(f"fixed_gamma={self.fixed_gamma} must lie in (0, 1]")
        if self.outcome_mode not in ("raw", "group"):
            out.append(f"outcome_mode must be 'raw' or 'group', got {self.outcome_mode!r}")
        if self.min_gap is not None and self.min_gap < 1:
            out.append("min_gap must be >= 1")
        return out

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def with_overrides(self, **kw: Any) -> "ShapingConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


@dataclass(frozen=True)
class ShapingTerm:
    raw_gain: float
    tax: float
    gamma: float
    length: int
    value: float


@dataclass(frozen=True)
class AdvantageSheet:
    record_id: str
    estimator: Estimator
    segment_advantages: tuple[float, ...]
    token_advantages: tuple[float, ...]
    shaping_terms: tuple[ShapingTerm, ...] = ()
    boundaries: tuple[int, ...] = ()
    potentials: tuple[float, ...] = ()


def on_grid(value: float, m: int, tol: float = GRID_TOL) -> bool:
    scaled = value * m
    return abs(scaled - round(scaled)) <= tol * max(1, m)


def validate(record: TrajectoryRecord, config: ShapingConfig) -> list[str]:
    """Return every invariant violation found in ``record``; empty means valid."""
    problems: list[str] = []
    if record.outcome not in (0, 1) or isinstance(record.outcome, bool):
        problems.append(f"outcome not binary: {record.outcome!r}")
    if not record.tokens:
        problems.append("tokens empty")
    for pos, tok in enumerate(record.tokens):
        if tok.index != pos:
            problems.append(f"token index {tok.index} at position {pos}: indices must be consecutive from 0")
            break
    for tok in record.tokens:
        if not (tok.entropy >= 0 and math.isfinite(tok.entropy)):
            problems.append(f"token {tok.index}: entropy {tok.entropy} must be finite and >= 0")
    if record.boundary_potentials is not None:
        m = config.m_rollouts
        for i, phi in enumerate(record.boundary_potentials):
            if not 0.0 - GRID_TOL <= phi <= 1.0 + GRID_TOL:
                problems.append(f"potential[{i}]={phi} outside [0, 1]")
            elif not on_grid(phi, m):
                problems.append(f"potential[{i}]={phi} off 1/{m} grid")
    return problems

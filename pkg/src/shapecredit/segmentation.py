"""Entropy-cutpoint segmentation of a token stream into K segments."""

from __future__ import annotations

import math
from typing import Mapping, Sequence

from .trajectory import SegmentPlan


def find_cutpoints(entropies: Sequence[float], tau: float) -> list[int]:
    """Interior positions whose entropy strictly exceeds ``tau``.

    The first and last token are never candidates: a boundary there would
    leave an empty segment.
    """
    if len(entropies) == 0:
        raise ValueError("empty trajectory")
    if not math.isfinite(tau):
        raise ValueError("tau must be finite")
    return [t for t in range(1, len(entropies) - 1) if entropies[t] > tau]


def default_min_gap(token_count: int, k: int) -> int:
    return max(1, token_count // (4 * k))


def downsample(
    candidates: Sequence[int],
    token_count: int,
    k: int,
    min_gap: int | None = None,
    entropies: Sequence[float] | Mapping[int, float] | None = None,
) -> SegmentPlan:
    """Reduce candidate cutpoints to exactly ``k - 1`` boundaries.

    Candidates are taken greedily by descending entropy (earlier index on
    ties); anything closer than ``min_gap`` to an accepted boundary is
    dropped. If the candidates run out, the largest remaining segment is
    split at its midpoint until there are ``k`` segments.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if token_count < k:
        raise ValueError("too few tokens for K segments")
    if min_gap is None:
        min_gap = default_min_gap(token_count, k)
    if min_gap < 1:
        raise ValueError("min_gap must be >= 1")

    pool = sorted({c for c in candidates if 0 < c < token_count})
    if entropies is None:
        ranked = pool
    else:
        ranked = sorted(pool, key=lambda c: (-entropies[c], c))

    chosen: list[int] = []
    for c in ranked:
        if len(chosen) == k - 1:
            break
        if all(abs(c - b) >= min_gap for b in chosen):
            chosen.append(c)

    chosen.sort()
    while len(chosen) < k - 1:
        edges = [0, *chosen, token_count]
        # earliest of the longest spans
        start, end = max(zip(edges[:-1], edges[1:]), key=lambda s: (s[1] - s[0], -s[0]))
        chosen.append(start + (end - start) // 2)
        chosen.sort()

    plan = SegmentPlan(tuple(chosen))
    plan.check(token_count)
    return plan


def segment_lengths(plan: SegmentPlan, token_count: int) -> list[int]:
    return [end - start for start, end in plan.spans(token_count)]


def segment(entropies: Sequence[float], tau: float, k: int, min_gap: int | None = None) -> SegmentPlan:
    """Threshold scan followed by greedy downsampling."""
    cands = find_cutpoints(entropies, tau)
    return downsample(cands, len(entropies), k, min_gap=min_gap, entropies=entropies)


def delimiter_plan(texts: Sequence[str | None], k: int, delimiter: str = "\n\n") -> SegmentPlan:
    """Fallback plan cutting after tokens whose text contains ``delimiter``.

    Candidates are kept in positional order (no entropy ranking), so the
    first ``k - 1`` delimiters win.
    """
    n = len(texts)
    cands = [i + 1 for i, t in enumerate(texts) if t and delimiter in t and 0 < i + 1 < n]
    return downsample(cands, n, k, min_gap=1)

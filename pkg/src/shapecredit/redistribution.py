"""Token-level credit redistribution by in-segment entropy Z-scores."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .trajectory import SegmentPlan, ShapingConfig, TokenInfo


def entropy_weights(
    entropies: Sequence[float],
    beta: float,
    delta_min: float,
    delta_max: float,
    epsilon: float,
    valid: Sequence[bool] | None = None,
    *,
    clip: bool = True,
) -> list[float]:
    """Clipped ``1 + beta * z`` weights, z taken over the segment's valid tokens.

    Invalid tokens get weight 1. A single valid token has zero spread and
    so also gets weight 1.
    """
    h = np.asarray(entropies, dtype=float)
    mask = np.ones(len(h), dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    if not mask.any():
        raise ValueError("segment has no valid tokens")
    hv = h[mask]
    mu = hv.mean()
    sigma = hv.std()
    w = np.ones(len(h))
    w[mask] = 1.0 + beta * (hv - mu) / (sigma + epsilon)
    if clip:
        w[mask] = np.clip(w[mask], delta_min, delta_max)
    return w.tolist()


def redistribute(
    segment_advantages: Sequence[float],
    plan: SegmentPlan,
    tokens: Sequence[TokenInfo],
    config: ShapingConfig,
) -> list[float]:
    """Per-token advantages ``A_k * w_t``; uniform broadcast when TCR is off."""
    spans = plan.spans(len(tokens))
    if len(segment_advantages) != len(spans):
        raise ValueError(f"dimension mismatch: {len(segment_advantages)} advantages for {len(spans)} segments")
    out: list[float] = []
    for a_k, (start, end) in zip(segment_advantages, spans):
        seg = tokens[start:end]
        if not config.tcr or config.beta == 0:
            out.extend([a_k] * len(seg))
            continue
        valid = [t.valid for t in seg]
        if not any(valid):
            # nothing to standardize against; keep the anchor
            out.extend([a_k] * len(seg))
            continue
        w = entropy_weights([t.entropy for t in seg], config.beta, config.delta_min,
                            config.delta_max, config.epsilon, valid)
        out.extend(a_k * wt for wt in w)
    return out

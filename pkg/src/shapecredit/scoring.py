"""End-to-end scoring: segment, estimate potentials, compute and redistribute advantages."""

from __future__ import annotations

from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from typing import Any, Sequence

from .potential import RolloutOracle, build_profile
from .redistribution import redistribute
from .segmentation import segment, segment_lengths
from .shaping import grpo_advantages, mrt_advantages, shape_advantages, shaping_terms
from .trajectory import AdvantageSheet, Estimator, SegmentPlan, ShapingConfig, TrajectoryRecord


def plan_for(record: TrajectoryRecord, config: ShapingConfig) -> SegmentPlan:
    """Entropy segmentation with K taken from logged potentials when present."""
    k = config.k_segments
    if record.boundary_potentials is not None:
        k = len(record.boundary_potentials) - 1
    if k == 1:
        return SegmentPlan(())
    if config.tau is None:
        raise ValueError("tau is required for entropy segmentation (no default exists)")
    return segment(record.entropies, config.tau, k, min_gap=config.min_gap)


def group_outcome_advantages(records: Sequence[TrajectoryRecord]) -> list[float]:
    """GRPO-normalized outcome for each record within its ``group_id``."""
    groups: dict[Any, list[int]] = defaultdict(list)
    for i, rec in enumerate(records):
        groups[rec.group_id].append(i)
    out = [0.0] * len(records)
    for gid, idx in groups.items():
        if len(idx) < 2:
            raise ValueError(f"group {gid!r} has {len(idx)} trajectory; GRPO needs >= 2")
        for i, a in zip(idx, grpo_advantages([records[i].outcome for i in idx])):
            out[i] = a
    return out


def score_records(
    records: Sequence[TrajectoryRecord],
    config: ShapingConfig,
    estimator: Estimator | str = Estimator.SHAPE,
    oracle: RolloutOracle | None = None,
    *,
    seed: int = 0,
    workers: int | None = None,
) -> list[AdvantageSheet]:
    """Score every record; output order matches input order for any ``workers``."""
    est = Estimator(estimator)
    needs_group = est is Estimator.GRPO or config.outcome_mode == "group"
    normed = group_outcome_advantages(records) if needs_group else None

    def one(idx: int) -> AdvantageSheet:
        rec = records[idx]
        plan = plan_for(rec, config)
        lengths = segment_lengths(plan, rec.token_count)
        if est is Estimator.GRPO:
            return AdvantageSheet(
                record_id=rec.id, estimator=est, segment_advantages=tuple([normed[idx]] * plan.k),
                token_advantages=tuple([normed[idx]] * rec.token_count),
                boundaries=plan.boundaries,
            )
        rec_seed = seed + idx * (plan.k + 1) * config.m_rollouts
        profile = build_profile(rec, plan, oracle, config, seed=rec_seed)
        outcome = normed[idx] if normed is not None else float(rec.outcome)
        if est is Estimator.SHAPE:
            seg = shape_advantages(profile, lengths, outcome, config)
            terms = tuple(shaping_terms(profile, lengths, config))
            tokens = redistribute(seg, plan, rec.tokens, config)
        else:
            seg = mrt_advantages(profile, outcome, config.alpha)
            terms = ()
            tokens = [a for a, n in zip(seg, lengths) for _ in range(n)]
        return AdvantageSheet(
            record_id=rec.id, estimator=est, segment_advantages=tuple(seg),
            token_advantages=tuple(tokens), shaping_terms=terms,
            boundaries=plan.boundaries, potentials=profile.values,
        )

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(len(records))))
    return [one(i) for i in range(len(records))]


def sheet_to_dict(sheet: AdvantageSheet) -> dict[str, Any]:
    return {
        "id": sheet.record_id,
        "estimator": sheet.estimator.value,
        "boundaries": list(sheet.boundaries),
        "potentials": list(sheet.potentials),
        "segment_advantages": list(sheet.segment_advantages),
        "token_advantages": list(sheet.token_advantages),
        "shaping_terms": [asdict(t) for t in sheet.shaping_terms],
    }

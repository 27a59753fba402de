"""Segment-level advantages: length-discounted shaping plus MRT and GRPO baselines."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .trajectory import PotentialProfile, ShapingConfig, ShapingTerm

GRPO_EPS = 1e-8


def dynamic_gamma(length: float, l_ref: float, gamma_min: float) -> float:
    """Discount decaying linearly from 1 at length 0 to ``gamma_min`` at ``l_ref``."""
    if l_ref <= 0:
        raise ValueError("l_ref must be positive")
    return max(gamma_min, 1.0 - (length / l_ref) * (1.0 - gamma_min))


def segment_gamma(length: float, config: ShapingConfig) -> float:
    if config.fixed_gamma is not None:
        return config.fixed_gamma
    return dynamic_gamma(length, config.l_ref, config.gamma_min)


def shaping_term(phi_k: float, phi_next: float, gamma_k: float) -> float:
    return gamma_k * phi_next - phi_k


def tax_decomposition(phi_k: float, phi_next: float, gamma_k: float) -> tuple[float, float]:
    """Split the shaping term into raw gain and reasoning tax.

    ``gamma_k * raw_gain - tax`` equals :func:`shaping_term` up to float
    rounding; :func:`recombine` evaluates it in the canonical order.
    """
    return phi_next - phi_k, (1 - gamma_k) * phi_k


def recombine(raw_gain: float, tax: float, gamma_k: float) -> float:
    return gamma_k * raw_gain - tax


def _check_dims(profile: PotentialProfile, lengths: Sequence[float]) -> None:
    if len(profile.values) != len(lengths) + 1:
        raise ValueError(f"dimension mismatch: {len(profile.values)} potentials for "
                         f"{len(lengths)} segments (need K+1)")


def shaping_terms(profile: PotentialProfile, lengths: Sequence[int], config: ShapingConfig) -> list[ShapingTerm]:
    _check_dims(profile, lengths)
    phi = profile.values
    out = []
    for k, length in enumerate(lengths):
        g = segment_gamma(length, config)
        gain, tax = tax_decomposition(phi[k], phi[k + 1], g)
        out.append(ShapingTerm(raw_gain=gain, tax=tax, gamma=g, length=int(length),
                               value=shaping_term(phi[k], phi[k + 1], g)))
    return out


def shape_advantages(
    profile: PotentialProfile,
    lengths: Sequence[int],
    outcome: float,
    config: ShapingConfig,
) -> list[float]:
    """A_k = outcome + alpha * (gamma_k(L_k) * Phi(s_{k+1}) - Phi(s_k))."""
    return [outcome + config.alpha * t.value for t in shaping_terms(profile, lengths, config)]


def mrt_advantages(profile: PotentialProfile, outcome: float, alpha: float) -> list[float]:
    """A_k = outcome + alpha * (outcome - Phi(s_k)) for k = 1..K."""
    if len(profile.values) < 2:
        raise ValueError("profile needs K+1 >= 2 values")
    return [outcome + alpha * (outcome - phi) for phi in profile.values[:-1]]


def grpo_advantages(outcomes: Sequence[float], eps: float = GRPO_EPS) -> list[float]:
    """Group-normalized outcomes with population std."""
    if len(outcomes) < 2:
        raise ValueError("GRPO needs a group of at least 2 trajectories")
    r = np.asarray(outcomes, dtype=float)
    return list(((r - r.mean()) / (r.std() + eps)).tolist())


def total_reward(
    profile: PotentialProfile,
    lengths: Sequence[int],
    outcome: float,
    config: ShapingConfig,
) -> float:
    return math.fsum(shape_advantages(profile, lengths, outcome, config))


def shaping_bonus(profile: PotentialProfile, lengths: Sequence[int], config: ShapingConfig) -> float:
    """Summed alpha-weighted shaping, i.e. total reward minus the outcome terms."""
    return config.alpha * math.fsum(t.value for t in shaping_terms(profile, lengths, config))


def mrt_bonus(profile: PotentialProfile, outcome: float, alpha: float) -> float:
    return alpha * math.fsum(outcome - phi for phi in profile.values[:-1])

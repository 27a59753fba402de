"""Numerical witnesses for the consistency, sign and sensitivity properties of the shaping term."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Any

import numpy as np

from .shaping import dynamic_gamma, shaping_term
from .trajectory import ConfigError, ShapingConfig

# (gamma, gamma * phi_next, phi_k, F) at phi_k = 5/8, phi_next = 7/8
PUBLISHED_GAMMA_TABLE = (
    (1.0, 0.875, 0.625, 0.250),
    (0.9, 0.788, 0.625, 0.163),
    (0.8, 0.700, 0.625, 0.075),
    (0.7, 0.613, 0.625, -0.013),
    (0.6, 0.525, 0.625, -0.100),
)
TABLE_TOL = 5e-4


@dataclass
class CheckReport:
    name: str
    passed: bool
    details: dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {"check": self.name, "passed": self.passed, **self.details}


def round3(x: float) -> float:
    """Round half away from zero at 3 decimals, the way printed tables do."""
    return float(Decimal(repr(round(x, 12))).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


def reproduce_gamma_table(phi_k: float = 5 / 8, phi_next: float = 7 / 8,
                          gammas=(1.0, 0.9, 0.8, 0.7, 0.6)) -> list[tuple[float, float, float, float]]:
    return [(g, round3(g * phi_next), round3(phi_k), round3(shaping_term(phi_k, phi_next, g)))
            for g in gammas]


def check_gamma_table() -> CheckReport:
    rows = reproduce_gamma_table()
    worst = max(abs(a - b) for row, ref in zip(rows, PUBLISHED_GAMMA_TABLE)
                for a, b in zip(row, ref))
    return CheckReport("gamma-table", worst <= TABLE_TOL + 1e-12,
                       {"max_abs_error": worst, "rows": [list(r) for r in rows]})


def critical_gamma(phi_k: float, phi_next: float) -> float:
    """Smallest discount keeping an improving step's shaping non-negative."""
    if phi_next == 0:
        raise ValueError("phi_next must be positive")
    return phi_k / phi_next


def improving_pairs(m: int = 8) -> list[tuple[Fraction, Fraction]]:
    return [(Fraction(i, m), Fraction(j, m)) for i in range(m + 1) for j in range(i + 1, m + 1)]


def sign_consistency(gamma: float, m: int = 8) -> dict[str, Any]:
    pairs = improving_pairs(m)
    values = [shaping_term(float(a), float(b), gamma) for a, b in pairs]
    negatives = [(float(a), float(b)) for (a, b), f in zip(pairs, values) if f <= 0]
    return {"gamma": gamma, "pairs": len(pairs), "min_F": min(values), "non_positive": negatives}


def check_sign_consistency(m: int = 8) -> CheckReport:
    safe = [sign_consistency(g, m) for g in (0.9, 1.0)]
    unsafe = sign_consistency(0.7, m)
    passed = all(not r["non_positive"] for r in safe) and bool(unsafe["non_positive"])
    return CheckReport("sign", passed, {
        "min_F_gamma_0.9": safe[0]["min_F"], "min_F_gamma_1.0": safe[1]["min_F"],
        "reversals_gamma_0.7": unsafe["non_positive"],
    })


def fuzz_task_consistency(trials: int, seed: int, config: ShapingConfig,
                          max_k: int = 24, include_extremes: bool = True) -> dict[str, Any]:
    """Random totals for correct and incorrect trajectories.

    Every sampled (K, potentials, lengths) is scored once with outcome 1
    and once with outcome 0. Potentials are unconstrained grid values,
    including the terminal one. ``include_extremes`` appends the two
    analytic worst cases so the reported extrema hit the bounds.
    """
    alpha = config.alpha
    if not alpha < 0.5:
        raise ConfigError(f"alpha={alpha} violates alpha < 0.5")
    rng = np.random.default_rng(seed)
    m, l_ref, gmin = config.m_rollouts, config.l_ref, config.gamma_min

    k = rng.integers(1, max_k + 1, size=trials)
    phi = rng.integers(0, m + 1, size=(trials, max_k + 1)) / m
    lengths = rng.integers(0, 3 * l_ref + 1, size=(trials, max_k))
    gam = np.maximum(gmin, 1.0 - lengths / l_ref * (1.0 - gmin))
    cols = np.arange(max_k)
    active = cols[None, :] < k[:, None]
    # segment j runs from column j to j+1; column k is the terminal potential
    shaping = np.where(active, gam * phi[:, 1:] - phi[:, :-1], 0.0).sum(axis=1)
    correct = k + alpha * shaping
    incorrect = alpha * shaping

    min_correct, max_incorrect = float(correct.min()), float(incorrect.max())
    if include_extremes:
        lo = 1 + alpha * shaping_term(1.0, 0.0, gmin)
        hi = alpha * shaping_term(0.0, 1.0, dynamic_gamma(0, l_ref, gmin))
        min_correct, max_incorrect = min(min_correct, lo), max(max_incorrect, hi)

    violations = int((correct < 1 - alpha).sum() + (incorrect > alpha).sum())
    return {
        "trials": int(trials),
        "violations": violations,
        "min_correct": min_correct,
        "max_incorrect": max_incorrect,
        "margin": min_correct - max_incorrect,
        "bound_correct": 1 - alpha,
        "bound_incorrect": alpha,
    }


def check_consistency(trials: int, seed: int, config: ShapingConfig) -> CheckReport:
    r = fuzz_task_consistency(trials, seed, config)
    a = config.alpha
    passed = (r["violations"] == 0 and r["min_correct"] >= 1 - a and r["max_incorrect"] <= a
              and r["margin"] >= 1 - 2 * a - 1e-9)
    return CheckReport("consistency", passed, r)


def derivative_check(samples: int, step: float = 1e-5, seed: int = 0,
                     l_ref: float = 512, gamma_min: float = 0.9) -> tuple[float, float]:
    """Max |central difference - closed form| for dF/dPhi_k and dF/dL.

    Lengths are drawn from both the linear and the clamped region of the
    discount, keeping ``2*step`` away from the kink at ``l_ref``.
    """
    if not 0 < step <= 1e-2:
        raise ValueError("step must lie in (0, 1e-2]")
    rng = np.random.default_rng(seed)
    slope = (1.0 - gamma_min) / l_ref
    err_phi = err_len = 0.0
    for _ in range(samples):
        phi_k = rng.uniform(0.0, 1.0)
        delta = rng.uniform(-phi_k, 1.0 - phi_k)
        if rng.random() < 0.5:
            length = rng.uniform(2 * step, l_ref - 2 * step)
        else:
            length = rng.uniform(l_ref + 2 * step, 3 * l_ref)
        g = dynamic_gamma(length, l_ref, gamma_min)

        def f_phi(p):  # gain and length held fixed
            return shaping_term(p, p + delta, g)

        fd_phi = (f_phi(phi_k + step) - f_phi(phi_k - step)) / (2 * step)
        err_phi = max(err_phi, abs(fd_phi - (g - 1.0)))

        phi_next = phi_k + delta

        def f_len(length_):
            return shaping_term(phi_k, phi_next, dynamic_gamma(length_, l_ref, gamma_min))

        fd_len = (f_len(length + step) - f_len(length - step)) / (2 * step)
        exact = -phi_next * slope if length < l_ref else 0.0
        err_len = max(err_len, abs(fd_len - exact))
    return err_phi, err_len


def check_derivatives(samples: int = 2000, step: float = 1e-5, seed: int = 0) -> CheckReport:
    e_phi, e_len = derivative_check(samples, step, seed)
    return CheckReport("derivatives", e_phi < 1e-6 and e_len < 1e-6,
                       {"samples": samples, "max_err_phi": e_phi, "max_err_length": e_len})


def run_suite(suite: str, trials: int = 100_000, seed: int = 0,
              config: ShapingConfig | None = None) -> list[CheckReport]:
    config = config or ShapingConfig()
    runners = {
        "gamma-table": lambda: check_gamma_table(),
        "sign": lambda: check_sign_consistency(config.m_rollouts),
        "consistency": lambda: check_consistency(trials, seed, config),
        "derivatives": lambda: check_derivatives(seed=seed),
    }
    if suite == "all":
        return [fn() for fn in runners.values()]
    if suite not in runners:
        raise ValueError(f"unknown suite {suite!r}")
    return [runners[suite]()]

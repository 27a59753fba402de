"""A solvability-chain MDP with a tabular softmax policy.

Each episode makes ``n_stages`` decisions. Every decision moves a progress
level ``p`` in ``0..P`` and emits a block of synthetic tokens; that block
is one segment. The episode succeeds with probability
``solvability[p_final]``, so ``solvability[p]`` is the potential of a state.

The module provides a rollout oracle over the chain, an exact dynamic
program to check it against, the fixed-path sandbagging comparison and a
score-function learner for comparing advantage estimators.
"""

from __future__ import annotations

import bisect
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .potential import register_oracle
from .shaping import grpo_advantages, mrt_advantages, mrt_bonus, shape_advantages, shaping_bonus
from .trajectory import PotentialProfile, PotentialSource, ShapingConfig, TrajectoryRecord

ADVANCE_SHORT, ADVANCE_LONG, STALL, REGRESS = range(4)
ACTION_NAMES = ("advance_short", "advance_long", "stall", "regress")
ACTION_DELTAS = (1, 1, 0, -1)


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class ChainEnv:
    n_stages: int = 8
    n_levels: int = 8
    m: int = 8
    short_cost: int = 8
    long_cost: int = 32
    solvability: tuple[float, ...] | None = None
    start_levels: tuple[int, ...] = (0,)
    boundary_entropy: tuple[float, float] = (2.0, 3.0)
    interior_entropy: tuple[float, float] = (0.05, 0.8)

    def __post_init__(self) -> None:
        if self.solvability is None:
            object.__setattr__(self, "solvability",
                               tuple(p / self.n_levels for p in range(self.n_levels + 1)))
        s = self.solvability
        if len(s) != self.n_levels + 1:
            raise ValueError("solvability needs one value per progress level 0..P")
        if any(b < a for a, b in zip(s, s[1:])):
            raise ValueError("solvability must be non-decreasing in progress")
        if any(abs(v * self.m - round(v * self.m)) > 1e-9 for v in s):
            raise ValueError(f"solvability values must lie on the 1/{self.m} grid")
        if not self.long_cost > self.short_cost >= 1:
            raise ValueError("need long_cost > short_cost >= 1")
        if self.boundary_entropy[0] <= self.interior_entropy[1]:
            raise ValueError("boundary entropies must sit above interior entropies")

    @property
    def costs(self) -> tuple[int, int, int, int]:
        return (self.short_cost, self.long_cost, self.short_cost, self.short_cost)

    def step(self, p: int, action: int) -> int:
        return min(self.n_levels, max(0, p + ACTION_DELTAS[action]))

    def potential(self, p: int) -> float:
        return self.solvability[p]

    @property
    def entropy_threshold(self) -> float:
        """A tau that separates the two entropy levels."""
        return (self.boundary_entropy[0] + self.interior_entropy[1]) / 2


def default_sim_config(**overrides) -> ShapingConfig:
    """Shaping settings matched to the default chain.

    The long action hits the gamma floor, and outcomes are group-normalized
    as in GRPO so the three estimators share one outcome baseline.
    """
    base = ShapingConfig(l_ref=32, k_segments=8, m_rollouts=8,
                         tau=ChainEnv().entropy_threshold, outcome_mode="group")
    return replace(base, **overrides)


class TabularPolicy:
    """Softmax over logits indexed by (stage, progress, action)."""

    def __init__(self, logits: np.ndarray, temperature: float = 1.0):
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        self.logits = np.array(logits, dtype=float)
        self.temperature = temperature

    @classmethod
    def uniform(cls, env: ChainEnv, temperature: float = 1.0) -> "TabularPolicy":
        return cls(np.zeros((env.n_stages, env.n_levels + 1, len(ACTION_NAMES))), temperature)

    @classmethod
    def fixed(cls, env: ChainEnv, action: int, strength: float = 50.0) -> "TabularPolicy":
        """Near-deterministic policy that always picks ``action``."""
        pol = cls.uniform(env)
        pol.logits[..., action] = strength
        return pol

    def probs(self) -> np.ndarray:
        z = self.logits / self.temperature
        z = z - z.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True)

    def copy(self) -> "TabularPolicy":
        return TabularPolicy(self.logits.copy(), self.temperature)


@dataclass(frozen=True)
class StageStep:
    action: int
    progress_before: int
    progress_after: int
    n_tokens: int


@dataclass(frozen=True)
class EpisodeTrace:
    steps: tuple[StageStep, ...]
    outcome: int
    potentials: tuple[float, ...]  # solvability at p_0 .. p_K

    @property
    def lengths(self) -> list[int]:
        return [s.n_tokens for s in self.steps]

    @property
    def n_tokens(self) -> int:
        return sum(self.lengths)

    def drops(self) -> int:
        return sum(b < a for a, b in zip(self.potentials, self.potentials[1:]))

    def profile(self, m: int) -> PotentialProfile:
        """Boundary potentials with the terminal entry replaced by the outcome."""
        return PotentialProfile(values=(*self.potentials[:-1], float(self.outcome)), m=m,
                                source=PotentialSource.ORACLE)


def _cdf_table(policy: TabularPolicy) -> list[list[list[float]]]:
    cdf = np.cumsum(policy.probs(), axis=-1)
    cdf[..., -1] = 1.0
    return cdf.tolist()


def _draw(cdf_row: Sequence[float], u: float) -> int:
    return bisect.bisect_right(cdf_row, u)


def run_episode(env: ChainEnv, policy: TabularPolicy | list, rng: random.Random,
                start_stage: int = 0, start_level: int = 0) -> EpisodeTrace:
    """Sample one episode. ``policy`` may be a precomputed CDF table."""
    cdf = policy if isinstance(policy, list) else _cdf_table(policy)
    p = start_level
    steps = []
    pots = [env.potential(p)]
    costs = env.costs
    for stage in range(start_stage, env.n_stages):
        a = _draw(cdf[stage][p], rng.random())
        q = env.step(p, a)
        steps.append(StageStep(a, p, q, costs[a]))
        p = q
        pots.append(env.potential(p))
    outcome = int(rng.random() < env.potential(p))
    return EpisodeTrace(tuple(steps), outcome, tuple(pots))


def completion_probability(env: ChainEnv, policy: TabularPolicy) -> np.ndarray:
    """Exact success probability from every (stage, level), shape (n_stages+1, P+1)."""
    probs = policy.probs()
    v = np.zeros((env.n_stages + 1, env.n_levels + 1))
    v[env.n_stages] = env.solvability
    nxt = np.array([[env.step(p, a) for a in range(4)] for p in range(env.n_levels + 1)])
    for stage in range(env.n_stages - 1, -1, -1):
        v[stage] = (probs[stage] * v[stage + 1][nxt]).sum(axis=-1)
    return v


def expected_tokens(env: ChainEnv, policy: TabularPolicy) -> float:
    """Exact expected tokens per episode from the start state."""
    probs = policy.probs()
    costs = np.array(env.costs, dtype=float)
    dist = np.zeros(env.n_levels + 1)
    dist[0] = 1.0
    total = 0.0
    for stage in range(env.n_stages):
        total += float(dist @ (probs[stage] @ costs))
        new = np.zeros_like(dist)
        for a in range(4):
            for p in range(env.n_levels + 1):
                new[env.step(p, a)] += dist[p] * probs[stage, p, a]
        dist = new
    return total


def expected_success(env: ChainEnv, policy: TabularPolicy) -> float:
    return float(completion_probability(env, policy)[0, 0])


class SimulatorOracle:
    """Complete a prefix under a fixed policy and report the binary outcome.

    The prefix state is read from the record's ``meta``: ``stage_starts``
    (token index of each stage) and ``progress`` (level before each stage,
    plus the final level). A boundary at token ``b`` resumes after the last
    stage that finished at or before ``b``.
    """

    def __init__(self, env: ChainEnv, policy: TabularPolicy):
        self.env = env
        self.policy = policy
        self._cdf = _cdf_table(policy)

    def state_at(self, record: TrajectoryRecord, boundary: int) -> tuple[int, int]:
        starts = record.meta["stage_starts"]
        progress = record.meta["progress"]
        done = bisect.bisect_right(starts, boundary) - 1
        if boundary >= record.token_count:
            done = len(starts)
        done = max(done, 0)
        return done, progress[done]

    def complete(self, stage: int, level: int, seed: int) -> int:
        rng = random.Random(seed)
        return run_episode(self.env, self._cdf, rng, start_stage=stage, start_level=level).outcome

    def __call__(self, record: TrajectoryRecord, boundary: int, seed: int) -> int:
        stage, level = self.state_at(record, boundary)
        return self.complete(stage, level, seed)


def rollout_oracle(env: ChainEnv, policy: TabularPolicy) -> SimulatorOracle:
    return SimulatorOracle(env, policy)


register_oracle("simulator", lambda: SimulatorOracle(ChainEnv(), TabularPolicy.uniform(ChainEnv())))


def trace_to_record(env: ChainEnv, trace: EpisodeTrace, id: str, seed: int,
                    group_id: str | None = None) -> TrajectoryRecord:
    """Render an episode as tokens with two-level entropies.

    The first token of every stage is drawn from ``boundary_entropy``, all
    others from ``interior_entropy``, so thresholding recovers the stage
    boundaries.
    """
    rng = random.Random(seed)
    ent: list[float] = []
    starts: list[int] = []
    for step in trace.steps:
        starts.append(len(ent))
        ent.append(rng.uniform(*env.boundary_entropy))
        ent.extend(rng.uniform(*env.interior_entropy) for _ in range(step.n_tokens - 1))
    progress = [s.progress_before for s in trace.steps] + [trace.steps[-1].progress_after]
    return TrajectoryRecord.from_entropies(
        id, ent, trace.outcome, group_id=group_id,
        boundary_potentials=trace.potentials,
        meta={"stage_starts": starts, "progress": progress,
              "actions": [ACTION_NAMES[s.action] for s in trace.steps]},
    )


# --- sandbagging -----------------------------------------------------------

MONOTONE_PATH = (0.0, 0.25, 0.5, 0.75, 1.0)
DIP_PATH = (0.0, 0.5, 0.0, 0.75, 1.0)


def path_lengths(env: ChainEnv, potentials: Sequence[float]) -> list[int]:
    """Tokens to traverse each transition using single-level short moves.

    A segment that moves ``d`` levels costs ``d * short_cost`` tokens
    (at least one move), so detours cost tokens.
    """
    out = []
    for a, b in zip(potentials, potentials[1:]):
        levels = abs(round((b - a) * env.n_levels))
        out.append(max(1, levels) * env.short_cost)
    return out


def sandbag_comparison(env: ChainEnv, config: ShapingConfig,
                       monotone: Sequence[float] = MONOTONE_PATH,
                       dip: Sequence[float] = DIP_PATH) -> dict[str, float]:
    """Shaping bonus (outcome terms excluded) of a monotone and a dipping path.

    Both paths end at potential 1 and are scored as correct.
    """
    if monotone[-1] != dip[-1]:
        raise ValueError("paths must share the same outcome")
    for path in (monotone, dip):
        for v in path:
            if abs(v * env.n_levels - round(v * env.n_levels)) > 1e-9:
                raise ValueError(f"potential {v} is not a level of this env")
    outcome = dip[-1]
    report = {}
    for name, path in (("mono", monotone), ("dip", dip)):
        prof = PotentialProfile(tuple(path), env.m, PotentialSource.ORACLE)
        report[f"mrt_bonus_{name}"] = mrt_bonus(prof, outcome, config.alpha)
        report[f"shape_bonus_{name}"] = shaping_bonus(prof, path_lengths(env, path), config)
    return report


# --- training --------------------------------------------------------------

AdvantageFn = Callable[[Sequence[EpisodeTrace], ChainEnv, ShapingConfig], list[list[float]]]


def _outcomes(traces, config):
    raw = [float(t.outcome) for t in traces]
    if config.outcome_mode == "group":
        return grpo_advantages(raw)
    return raw


def shape_stage_advantages(traces, env, config):
    outs = _outcomes(traces, config)
    return [shape_advantages(t.profile(env.m), t.lengths, r, config) for t, r in zip(traces, outs)]


def mrt_stage_advantages(traces, env, config):
    outs = _outcomes(traces, config)
    return [mrt_advantages(t.profile(env.m), r, config.alpha) for t, r in zip(traces, outs)]


def grpo_stage_advantages(traces, env, config):
    adv = grpo_advantages([t.outcome for t in traces])
    return [[a] * len(t.steps) for a, t in zip(adv, traces)]


def zero_stage_advantages(traces, env, config):
    return [[0.0] * len(t.steps) for t in traces]


STAGE_ESTIMATORS: dict[str, AdvantageFn] = {
    "shape": shape_stage_advantages,
    "mrt": mrt_stage_advantages,
    "grpo": grpo_stage_advantages,
    "zero": zero_stage_advantages,
}


@dataclass
class TrainingResult:
    estimator: str
    seed: int
    policy: TabularPolicy
    windows: list[dict[str, float]] = field(default_factory=list)
    final_success: float = 0.0
    final_tokens: float = 0.0

    @property
    def final_drop_rate(self) -> float:
        return self.windows[-1]["potential_drop_rate"] if self.windows else math.nan


def train(
    env: ChainEnv,
    estimator: str | AdvantageFn,
    episodes: int,
    seed: int,
    config: ShapingConfig,
    *,
    lr: float = 0.1,
    group_size: int = 8,
    credit: str = "stage",
    window: int = 50,
    max_logit: float = 100.0,
    policy: TabularPolicy | None = None,
) -> TrainingResult:
    """Score-function policy gradient with per-stage advantages.

    Episodes come in groups of ``group_size`` sharing one policy snapshot;
    each group yields one update ``logits += lr * mean_i sum_k A_ik *
    grad log pi(a_ik)``. Metrics are averaged over consecutive windows of
    ``window`` episodes; ``final_success`` and ``final_tokens`` are exact
    values for the final policy.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    adv_fn = STAGE_ESTIMATORS[estimator] if isinstance(estimator, str) else estimator
    name = estimator if isinstance(estimator, str) else getattr(estimator, "__name__", "custom")
    pol = policy.copy() if policy is not None else TabularPolicy.uniform(env)
    rng = random.Random(seed)
    result = TrainingResult(estimator=name, seed=seed, policy=pol)

    buf_success = buf_tokens = buf_drops = buf_trans = buf_n = 0
    done = 0
    while done < episodes:
        n = min(group_size, episodes - done)
        probs = pol.probs()
        cdf = np.cumsum(probs, axis=-1)
        cdf[..., -1] = 1.0
        cdf = cdf.tolist()
        start = env.start_levels[rng.randrange(len(env.start_levels))]
        traces = [run_episode(env, cdf, rng, start_level=start) for _ in range(n)]
        if n >= 2:
            advs = adv_fn(traces, env, config)
            if credit == "to-go":
                advs = [list(np.cumsum(a[::-1])[::-1]) for a in advs]
            grad = np.zeros_like(pol.logits)
            for trace, adv in zip(traces, advs):
                for k, (step, a_k) in enumerate(zip(trace.steps, adv)):
                    if a_k == 0.0:
                        continue
                    g = -probs[k, step.progress_before] * a_k
                    g[step.action] += a_k
                    grad[k, step.progress_before] += g
            pol.logits += lr * grad / (n * pol.temperature)
            if np.abs(pol.logits).max() > max_logit:
                raise DivergenceError(f"logit magnitude exceeded {max_logit} after {done + n} episodes")

        for t in traces:
            buf_success += t.outcome
            buf_tokens += t.n_tokens
            buf_drops += t.drops()
            buf_trans += len(t.steps)
            buf_n += 1
            done += 1
            if buf_n == window or done == episodes:
                result.windows.append({
                    "episode_end": done,
                    "success_rate": buf_success / buf_n,
                    "mean_tokens": buf_tokens / buf_n,
                    "potential_drop_rate": buf_drops / buf_trans,
                })
                buf_success = buf_tokens = buf_drops = buf_trans = buf_n = 0

    result.final_success = expected_success(env, pol)
    result.final_tokens = expected_tokens(env, pol)
    return result


def _train_job(args):
    env, estimator, episodes, seed, config, kw = args
    return train(env, estimator, episodes, seed, config, **kw)


def train_many(env: ChainEnv, estimator: str, episodes: int, seeds: Sequence[int],
               config: ShapingConfig, *, max_workers: int | None = None, **kw) -> list[TrainingResult]:
    """Run :func:`train` once per seed; results come back in ``seeds`` order."""
    jobs = [(env, estimator, episodes, s, config, kw) for s in seeds]
    if max_workers is not None and max_workers <= 1:
        return [_train_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(_train_job, jobs))


WINDOW_COLUMNS = ["estimator", "seed", "episode_end", "success_rate", "mean_tokens", "potential_drop_rate"]


def window_rows(result: TrainingResult) -> list[list]:
    return [[result.estimator, result.seed, w["episode_end"], w["success_rate"],
             w["mean_tokens"], w["potential_drop_rate"]] for w in result.windows]


def sample_records(env: ChainEnv, policy: TabularPolicy, n: int, seed: int,
                   group_size: int = 8) -> list[TrajectoryRecord]:
    """Episodes from ``policy`` rendered as trajectory records, ``group_size`` per group."""
    rng = random.Random(seed)
    cdf = _cdf_table(policy)
    out = []
    for i in range(n):
        trace = run_episode(env, cdf, rng)
        out.append(trace_to_record(env, trace, f"ep{i}", seed=rng.getrandbits(32),
                                   group_id=f"g{i // group_size}"))
    return out


def transitions_from_traces(traces: Sequence[EpisodeTrace]) -> list[tuple[float, float, int]]:
    """(phi_k, gain, outcome) for every adjacent boundary pair."""
    out = []
    for t in traces:
        for a, b in zip(t.potentials, t.potentials[1:]):
            out.append((a, b - a, t.outcome))
    return out


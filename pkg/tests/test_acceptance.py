"""Acceptance criteria, one test per criterion.

Every test records a single ``PASS``/``FAIL`` line; the lines are printed in
the pytest terminal summary and when this file is run as a script.
"""

from __future__ import annotations

import csv
import json
import math
import time
from fractions import Fraction as Fr

import numpy as np
import pytest
from oracles import mrt_path_bonus, path_bonus

from shapecredit.cli import main
from shapecredit.potential import estimate_potential
from shapecredit.scoring import score_records
from shapecredit.segmentation import segment
from shapecredit.simulator import (
    ChainEnv,
    SimulatorOracle,
    TabularPolicy,
    completion_probability,
    default_sim_config,
    path_lengths,
    sample_records,
    train_many,
)
from shapecredit.trajectory import ShapingConfig, TrajectoryRecord

RESULTS: dict[float, str] = {}

# printed rows at phi 5/8 -> 7/8: (gamma, gamma*phi_next, phi_k, F)
PRINTED_TABLE = [
    (1.0, 0.875, 0.625, 0.250),
    (0.9, 0.788, 0.625, 0.163),
    (0.8, 0.700, 0.625, 0.075),
    (0.7, 0.613, 0.625, -0.013),
    (0.6, 0.525, 0.625, -0.100),
]

SEEDS = (0, 1, 2, 3, 4)
EPISODES = 30_000


def record(n: int, name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {name} | {detail}"
    RESULTS[n] = line
    print(line)


def run_check(tmp_path, *args):
    out = tmp_path / "check.json"
    t0 = time.perf_counter()
    code = main(["check", *args, "--out", str(out)])
    return code, json.loads(out.read_text()), time.perf_counter() - t0


def test_1_gamma_table(tmp_path):
    code, rep, dt = run_check(tmp_path, "--suite", "gamma-table")
    rows = rep[0]["rows"]
    err = max(abs(a - b) for row, ref in zip(rows, PRINTED_TABLE) for a, b in zip(row, ref))
    ok = code == 0 and len(rows) == 5 and err <= 5e-4 and dt < 1.0
    record(1, "gamma table", ok, f"F={[r[3] for r in rows]} max_err={err:.1e} t={dt:.2f}s")
    assert ok


def test_2_task_consistency(tmp_path):
    code, rep, dt = run_check(tmp_path, "--suite", "consistency", "--trials", "100000", "--alpha", "0.3")
    r = rep[0]
    ok = (code == 0 and r["trials"] == 100_000 and r["violations"] == 0
          and r["min_correct"] >= 0.7 and r["max_incorrect"] <= 0.3 and dt < 10)
    record(2, "task consistency", ok, f"violations={r['violations']} min_correct={r['min_correct']:.6f} "
           f"max_incorrect={r['max_incorrect']:.6f} t={dt:.2f}s")
    assert ok


def test_3_sign_consistency(tmp_path):
    code, rep, dt = run_check(tmp_path, "--suite", "sign")
    # independent exhaustive enumeration over the 1/8 grid
    pairs = [(Fr(i, 8), Fr(j, 8)) for i in range(9) for j in range(i + 1, 9)]
    neg = {g: [(a, b) for a, b in pairs if Fr(g) * b - a <= 0] for g in ("0.9", "1.0", "0.7")}
    ok = (code == 0 and len(pairs) == 36 and not neg["0.9"] and not neg["1.0"]
          and (Fr(5, 8), Fr(7, 8)) in neg["0.7"] and dt < 1.0)
    record(3, "sign consistency", ok, f"pairs={len(pairs)} reversals@0.7={len(neg['0.7'])} t={dt:.2f}s")
    assert ok


def test_4_derivatives(tmp_path):
    code, rep, dt = run_check(tmp_path, "--suite", "derivatives")
    r = rep[0]
    ok = (code == 0 and r["samples"] >= 1000 and r["max_err_phi"] < 1e-6
          and r["max_err_length"] < 1e-6 and dt < 5)
    record(4, "derivative checks", ok, f"n={r['samples']} err_phi={r['max_err_phi']:.1e} "
           f"err_len={r['max_err_length']:.1e} t={dt:.2f}s")
    assert ok


# hand enumeration, alpha 0.3, gamma_min 0.9, l_ref 32, 8 tokens per level moved
HAND = {"mrt_mono": 0.75, "mrt_dip": 0.825, "shape_mono": 0.2625, "shape_dip": 0.2475}


def test_5_sandbagging(tmp_path):
    out = tmp_path / "sandbag.csv"
    code = main(["sandbag", "--out", str(out)])
    with open(out, newline="") as fh:
        rows = {r["path"]: r for r in csv.DictReader(fh)}
    got = {f"{e}_{p}": float(rows[p][f"{e}_bonus"]) for e in ("mrt", "shape") for p in ("mono", "dip")}

    env = ChainEnv()
    paths = {"mono": (0, Fr(1, 4), Fr(1, 2), Fr(3, 4), 1), "dip": (0, Fr(1, 2), 0, Fr(3, 4), 1)}
    exact = {}
    for p, phis in paths.items():
        lengths = path_lengths(env, [float(x) for x in phis])
        exact[f"shape_{p}"] = path_bonus(phis, lengths, Fr(3, 10), Fr(9, 10), 32)
        exact[f"mrt_{p}"] = mrt_path_bonus(phis, 1, Fr(3, 10))
    match = all(math.isclose(got[k], HAND[k], abs_tol=1e-12) and exact[k] == Fr(HAND[k]).limit_denominator(10**6)
                for k in HAND)
    ok = (code == 0 and match and got["mrt_dip"] > got["mrt_mono"] and got["shape_dip"] < got["shape_mono"])
    record(5, "sandbagging", ok, "mrt dip/mono={mrt_dip:.4f}/{mrt_mono:.4f} "
           "shape dip/mono={shape_dip:.4f}/{shape_mono:.4f}".format(**got))
    assert ok


@pytest.fixture(scope="module")
def trained():
    env, cfg = ChainEnv(), default_sim_config()
    t0 = time.perf_counter()
    res = {e: train_many(env, e, EPISODES, SEEDS, cfg) for e in ("shape", "mrt", "grpo")}
    return res, time.perf_counter() - t0


def test_6a_success_and_tokens(trained):
    res, dt = trained
    succ = {e: np.array([r.final_success for r in rs]) for e, rs in res.items()}
    tok = {e: np.array([r.final_tokens for r in rs]) for e, rs in res.items()}
    gap = abs(succ["shape"].mean() - succ["grpo"].mean())
    saving = 1 - tok["shape"].mean() / tok["grpo"].mean()
    ok = gap <= 0.02 and saving >= 0.15 and dt < 300
    record(6, "simulator (a) success and tokens vs GRPO", ok,
           f"success shape={succ['shape'].mean():.4f} grpo={succ['grpo'].mean():.4f} "
           f"tokens shape={tok['shape'].mean():.1f} grpo={tok['grpo'].mean():.1f} "
           f"saving={saving:.1%} train_t={dt:.0f}s")
    assert ok


def test_6b_drop_rate_vs_mrt(trained):
    res, dt = trained
    shape = [r.final_drop_rate for r in res["shape"]]
    mrt = [r.final_drop_rate for r in res["mrt"]]
    wins = sum(s < m for s, m in zip(shape, mrt))
    ok = wins >= 4 and dt < 300
    line = f"final-window drop shape={np.round(shape, 3).tolist()} mrt={np.round(mrt, 3).tolist()} wins={wins}/5"
    RESULTS[6.5] = f"[{'PASS' if ok else 'FAIL'}] criterion 6: simulator (b) drop rate vs MRT | {line}"
    print(RESULTS[6.5])
    assert ok


def _sheet(cfg, rec):
    return score_records([rec], cfg, "shape")[0]


def test_7_ablation_hooks(fixture_record):
    base = ShapingConfig(tau=1.5, k_segments=3, l_ref=10)
    full = _sheet(base, fixture_record)
    no_tcr = _sheet(base.with_overrides(tcr=False), fixture_record)
    fixed = _sheet(base.with_overrides(fixed_gamma=0.9), fixture_record)
    spans = [(0, 3), (3, 13), (13, 17)]
    lengths = [b - a for a, b in spans]

    # no TCR: identical segment advantages, tokens uniform per segment, full SHAPE is not
    uniform = all(len(set(no_tcr.token_advantages[a:b])) == 1 for a, b in spans)
    full_varies = any(len(set(full.token_advantages[a:b])) > 1 for a, b in spans)
    tcr_ok = uniform and full_varies and no_tcr.segment_advantages == full.segment_advantages

    # fixed gamma: constant gamma, so tax no longer grows with length; advantages change
    # exactly on segments shorter than l_ref (where the dynamic gamma is above 0.9)
    g_full = [t.gamma for t in full.shaping_terms]
    g_fixed = [t.gamma for t in fixed.shaping_terms]
    differs = [not math.isclose(a, b) for a, b in zip(full.segment_advantages, fixed.segment_advantages)]
    fixed_ok = (len(set(g_fixed)) == 1 and g_full[0] > g_full[2] > g_full[1]
                and differs == [n < 10 for n in lengths])
    ok = tcr_ok and fixed_ok
    record(7, "ablation hooks", ok, f"lengths={lengths} gamma_full={np.round(g_full, 3).tolist()} "
           f"gamma_fixed={g_fixed} seg_changed={differs}")
    assert ok


def test_8_oracle_unbiased():
    env = ChainEnv()
    pol = TabularPolicy.uniform(env)
    oracle = SimulatorOracle(env, pol)
    truth = completion_probability(env, pol)[0]
    reps, m = 10_000, 8
    stub = TrajectoryRecord.from_entropies("stub", [0.0] * 8, 0,
                                           meta={"stage_starts": [0], "progress": [0, 0]})
    worst, detail = 0.0, []
    for level in range(env.n_levels + 1):
        def level_oracle(rec, b, seed, _lvl=level):
            return oracle.complete(0, _lvl, seed)
        est = np.mean([estimate_potential(stub, 0, level_oracle, m, r * m) for r in range(reps)])
        se = math.sqrt(truth[level] * (1 - truth[level]) / (reps * m))
        z = abs(est - truth[level]) / se if se > 0 else (0.0 if est == truth[level] else math.inf)
        worst = max(worst, z)
        detail.append(f"{est:.4f}/{truth[level]:.4f}")
    ok = worst <= 3
    record(8, "oracle unbiasedness", ok, f"max |z|={worst:.2f} est/dp={detail}")
    assert ok


def test_9_segmentation_recovers_stages():
    env, cfg = ChainEnv(), default_sim_config()
    recs = sample_records(env, TabularPolicy.uniform(env), 200, seed=123)
    hits = sum(list(segment(r.entropies, cfg.tau, 8, cfg.min_gap).boundaries) == r.meta["stage_starts"][1:]
               for r in recs)
    ok = hits == len(recs)
    record(9, "end-to-end segmentation", ok, f"{hits}/{len(recs)} traces recovered all 7 boundaries")
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s"]))

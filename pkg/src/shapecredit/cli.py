"""Command-line entry point.

Exit codes: 0 success, 1 validation or input failure, 2 check-suite failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from . import io as sio
from .potential import OracleError, get_oracle
from .reporting import (
    BINS,
    GAIN_EPS,
    gain_distributions,
    gain_regression,
    record_transitions,
    stride_records,
)
from .scoring import score_records, sheet_to_dict
from .segmentation import segment
from .simulator import (
    DIP_PATH,
    MONOTONE_PATH,
    WINDOW_COLUMNS,
    ChainEnv,
    DivergenceError,
    default_sim_config,
    path_lengths,
    sample_records,
    sandbag_comparison,
    train,
    window_rows,
)
from .theory import run_suite
from .trajectory import ConfigError, ShapingConfig, TrajectoryRecord, validate

log = logging.getLogger("shapecredit")

EXIT_OK, EXIT_INVALID, EXIT_CHECK = 0, 1, 2

# flag dest -> ShapingConfig field
CONFIG_FLAGS = {
    "alpha": float, "gamma_min": float, "l_ref": int, "k_segments": int, "m_rollouts": int,
    "tau": float, "beta": float, "delta_min": float, "delta_max": float, "epsilon": float,
    "fixed_gamma": float, "min_gap": int, "outcome_mode": str,
}


class InputError(ValueError):
    pass


def _config_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("-v", "--verbose", action="store_true")
    g = p.add_argument_group("shaping config (flag > --config file > default)")
    g.add_argument("--config", help=f"flat key=value or JSON file (default: ${sio.CONFIG_ENV_VAR})")
    for dest, typ in CONFIG_FLAGS.items():
        flag = "--k" if dest == "k_segments" else "--m" if dest == "m_rollouts" else "--" + dest.replace("_", "-")
        kw: dict[str, Any] = {"dest": dest, "type": typ, "default": None}
        if dest == "outcome_mode":
            kw["choices"] = ("raw", "group")
        g.add_argument(flag, **kw)
    g.add_argument("--no-tcr", dest="tcr", action="store_false", default=None,
                   help="broadcast segment advantages uniformly to tokens")
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config field")
    return p


def _config(args: argparse.Namespace, base: ShapingConfig | None = None) -> ShapingConfig:
    overrides: dict[str, Any] = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = sio.parse_config_text(f"{key}={value}")[key.strip()]
    for dest in (*CONFIG_FLAGS, "tcr"):
        v = getattr(args, dest, None)
        if v is not None:
            overrides[dest] = v
    return sio.load_config(args.config, overrides, base)


def _read_records(args: argparse.Namespace, config: ShapingConfig) -> list[TrajectoryRecord]:
    try:
        records = list(sio.iter_records(args.input, strict=args.strict))
    except sio.ParseError as exc:
        raise InputError(f"{args.input}: {exc}") from exc
    kept = []
    for rec in records:
        problems = validate(rec, config)
        if problems:
            msg = f"record {rec.id}: " + "; ".join(problems)
            if args.strict:
                raise InputError(msg)
            log.warning("skipping %s", msg)
            continue
        kept.append(rec)
    return kept


def _emit_jsonl(out: str | None, rows: list[dict]) -> None:
    if out in (None, "-"):
        for r in rows:
            sys.stdout.write(json.dumps(r, ensure_ascii=False) + "\n")
    else:
        sio.write_jsonl(out, rows)


def _emit_csv(out: str | None, header: list[str], rows: list[list]) -> None:
    if out in (None, "-"):
        sys.stdout.write(sio.csv_text(header, rows))
    else:
        sio.write_csv(out, header, rows)


def _oracle(args: argparse.Namespace):
    return get_oracle(args.oracle) if args.oracle else None


# --- commands ----------------------------------------------------------------

def cmd_segment(args: argparse.Namespace) -> int:
    config = _config(args)
    if config.tau is None:
        raise ConfigError("segment needs --tau (no default threshold exists)")
    rows = []
    for rec in _read_records(args, config):
        plan = segment(rec.entropies, config.tau, config.k_segments, min_gap=config.min_gap)
        rows.append({"id": rec.id, "boundaries": list(plan.boundaries)})
    _emit_jsonl(args.out, rows)
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    config = _config(args)
    records = _read_records(args, config)
    sheets = score_records(records, config, args.estimator, _oracle(args),
                           seed=args.seed, workers=args.workers)
    _emit_jsonl(args.out, [sheet_to_dict(s) for s in sheets])
    return EXIT_OK


COMPARE_COLUMNS = ["id", "estimator", "n_tokens", "k", "segment_advantages", "sum_segment_advantage",
                   "mean_token_advantage", "min_token_advantage", "max_token_advantage"]


def cmd_compare(args: argparse.Namespace) -> int:
    config = _config(args)
    records = _read_records(args, config)
    names = [e.strip() for e in args.estimators.split(",") if e.strip()]
    if not names:
        raise ConfigError("--estimators is empty")
    per_est = {e: score_records(records, config, e, _oracle(args), seed=args.seed, workers=args.workers)
               for e in names}
    rows = []
    for i, rec in enumerate(records):
        for e in names:
            s = per_est[e][i]
            tok = s.token_advantages
            rows.append([rec.id, e, len(tok), len(s.segment_advantages),
                         ";".join(repr(a) for a in s.segment_advantages), sum(s.segment_advantages),
                         sum(tok) / len(tok), min(tok), max(tok)])
    _emit_csv(args.out, COMPARE_COLUMNS, rows)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _config(args, default_sim_config())
    env = ChainEnv()
    res = train(env, args.estimator, args.episodes, args.seed, config, lr=args.lr,
                group_size=args.group_size, credit=args.credit, window=args.window)
    _emit_csv(args.out, WINDOW_COLUMNS, window_rows(res))
    if args.traces:
        recs = sample_records(env, res.policy, args.n_traces, args.seed, args.group_size)
        sio.write_jsonl(args.traces, [sio.record_to_dict(r) for r in recs])
    log.info("final success %.4f, expected tokens %.1f", res.final_success, res.final_tokens)
    return EXIT_OK


SANDBAG_COLUMNS = ["path", "potentials", "lengths", "mrt_bonus", "shape_bonus"]


def cmd_sandbag(args: argparse.Namespace) -> int:
    config = _config(args, default_sim_config())
    env = ChainEnv()
    rep = sandbag_comparison(env, config)
    rows = []
    for name, path in (("mono", MONOTONE_PATH), ("dip", DIP_PATH)):
        rows.append([name, ";".join(map(str, path)), ";".join(map(str, path_lengths(env, path))),
                     rep[f"mrt_bonus_{name}"], rep[f"shape_bonus_{name}"]])
    _emit_csv(args.out, SANDBAG_COLUMNS, rows)
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    config = _config(args)
    reports = run_suite(args.suite, trials=args.trials, seed=args.seed, config=config)
    payload = [r.as_dict() for r in reports]
    text = json.dumps(payload, indent=2, default=str)
    if args.out:
        with sio.atomic_write(args.out) as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK


REPORT_COLUMNS = ["input", "section", "group", "value", "n"]


def cmd_report(args: argparse.Namespace) -> int:
    config = _config(args)
    methods: dict[str, list] = {}
    for item in args.input:
        label, sep, path = item.partition("=")
        if not sep:
            label, path = Path(item).stem, item
        ns = argparse.Namespace(input=path, strict=args.strict)
        records = stride_records(_read_records(ns, config), args.stride)
        trans = record_transitions(records)
        if not trans:
            raise InputError(f"{path}: no records with boundary_potentials")
        methods[label] = trans

    rows: list[list] = []
    for label, trans in methods.items():
        fits = gain_regression(trans, args.threshold_low, args.threshold_high)
        for g, fit in fits.items():
            rows.append([label, "slope", g, fit.slope, fit.n])
            rows.append([label, "raw_intercept", g, fit.raw_intercept, fit.n])
    dists = gain_distributions(methods, eps=args.eps, m=config.m_rollouts)
    for label, dist in dists.items():
        for name, _ in BINS:
            rows.append([label, "gain_share_pct", name, dist[name], len(methods[label])])
    _emit_csv(args.out, REPORT_COLUMNS, rows)
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    cfg = _config_parent()
    io_p = argparse.ArgumentParser(add_help=False)
    io_p.add_argument("--input", required=True, help="trajectory JSONL")
    io_p.add_argument("--strict", action="store_true", help="abort on the first malformed or invalid record")
    seed_p = argparse.ArgumentParser(add_help=False)
    seed_p.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(prog="shapecredit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", parents=[cfg, io_p], help="entropy segmentation to {id, boundaries} JSONL")
    p.add_argument("--out")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("score", parents=[cfg, io_p, seed_p], help="advantage sheets as JSONL")
    p.add_argument("--estimator", choices=("shape", "mrt", "grpo"), default="shape")
    p.add_argument("--oracle", help="rollout oracle name for records without logged potentials")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("compare", parents=[cfg, io_p, seed_p], help="one CSV row per (trajectory, estimator)")
    p.add_argument("--estimators", default="shape,mrt,grpo")
    p.add_argument("--oracle")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", parents=[cfg, seed_p], help="train on the chain env, windowed CSV")
    p.add_argument("--estimator", choices=("shape", "mrt", "grpo"), default="shape")
    p.add_argument("--episodes", type=int, default=30_000)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--group-size", type=int, default=8)
    p.add_argument("--credit", choices=("stage", "to-go"), default="stage")
    p.add_argument("--window", type=int, default=50)
    p.add_argument("--traces", help="also write final-policy episodes as trajectory JSONL")
    p.add_argument("--n-traces", type=int, default=512)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sandbag", parents=[cfg], help="monotone vs dip shaping bonus CSV")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sandbag)

    p = sub.add_parser("check", parents=[cfg, seed_p], help="numerical property suites")
    p.add_argument("--suite", choices=("consistency", "gamma-table", "sign", "derivatives", "all"),
                   default="all")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("report", parents=[cfg], help="gain regression and gain distribution CSV")
    p.add_argument("--input", action="append", required=True, metavar="[LABEL=]PATH")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--stride", type=int, default=1, help="keep every N-th batch (group_id run)")
    p.add_argument("--threshold-low", type=float, default=0.25)
    p.add_argument("--threshold-high", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=GAIN_EPS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, InputError, OracleError, DivergenceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

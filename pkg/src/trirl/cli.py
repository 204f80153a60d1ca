"""Command-line surface: attack one image, benchmark a manifest, render reports.

TRIRL_LOG in {error, info, debug, trace} controls diagnostics (trace adds a
level below logging.DEBUG).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import rl
from .attack import AttackConfig, run_attack
from .evaluate import (
    BenchmarkConfig,
    load_manifest,
    make_oracle,
    result_record,
    run_benchmark,
)
from .tensor import read_tensor

TRACE = 5
logging.addLevelName(TRACE, "TRACE")
log = logging.getLogger("trirl")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG, "trace": TRACE}


def _setup_logging() -> None:
    name = os.environ.get("TRIRL_LOG", "error").lower()
    if name not in _LOG_LEVELS:
        raise SystemExit(f"TRIRL_LOG must be one of {', '.join(_LOG_LEVELS)}, got {name!r}")
    logging.basicConfig(level=_LOG_LEVELS[name], format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v)


def _attack_config(args, controller: str, budget: int, seed: int) -> AttackConfig:
    return AttackConfig(
        controller=controller,
        max_queries=budget,
        seed=seed,
        freq_ratio=args.freq_ratio,
        reward_mode=args.reward,
        explore_increase_only=args.explore_increase_only,
        count_init_queries=not args.free_init,
    )


def cmd_attack(args) -> int:
    x = read_tensor(args.image)
    oracle = make_oracle(args.oracle)
    cfg = _attack_config(args, args.controller, args.budget, args.seed)
    try:
        result = run_attack(x, args.label, oracle, cfg)
    finally:
        oracle.close()
    rec = result_record(Path(args.image).stem, args.controller, x, result, args.seed)
    with open(args.out, "a") as fh:
        fh.write(json.dumps(rec) + "\n")
    if args.dump_qtable and result.qtable is not None:
        qpath = Path(args.out).with_suffix(".qtable.json")
        qpath.write_text(result.qtable.dump_json())
        log.info("Q-table written to %s", qpath)
    print(json.dumps(rec))
    return 0


def cmd_bench(args) -> int:
    entries = load_manifest(args.manifest)
    budgets = args.budgets
    if len(budgets) != 2:
        raise SystemExit("--budgets wants exactly two integers: TA,TARL")
    cfg = BenchmarkConfig(
        budgets={"ta": budgets[0], "tarl": budgets[1]},
        constants=args.c,
        workers=args.workers,
        seed=args.seed,
        attack=AttackConfig(
            freq_ratio=args.freq_ratio,
            reward_mode=args.reward,
            explore_increase_only=args.explore_increase_only,
            count_init_queries=not args.free_init,
        ),
        keep_qtable=args.keep_qtable,
    )
    report = run_benchmark(entries, args.oracle, args.out_dir, cfg)
    print(report.render("table"))
    if report.errors:
        log.error("%d image/controller attacks failed", len(report.errors))
    return 0


def cmd_report(args) -> int:
    records = []
    for path in args.inputs:
        with open(path) as fh:
            records.extend(json.loads(line) for line in fh if line.strip())
    if not records:
        raise SystemExit("no records in the given JSONL files")
    constants = sorted({float(k) for rec in records for k in rec["success"]})
    from .evaluate import BenchmarkReport

    budgets = {"ta": 0, "tarl": 0}
    for rec in records:
        budgets.setdefault(rec["controller"], 0)
        budgets[rec["controller"]] = max(budgets[rec["controller"]], rec["queries_used"])
    report = BenchmarkReport(records=records, errors=[], budgets=budgets, constants=tuple(constants))
    print(report.render(args.format))
    return 0


def cmd_fixtures(args) -> int:
    from .fixtures import FIXTURE_IDS, audit_fixture, load_fixture

    if args.audit:
        ok = True
        for fid in FIXTURE_IDS:
            rep = audit_fixture(load_fixture(fid))
            status = "ok" if rep.ok else "FAILED"
            print(
                f"{fid}: {status} (wedge={rep.wedge_hits} blob={rep.blob_hits} "
                f"trajectory_clean={rep.ta_trajectory_clean} productive={len(rep.productive_alphas)})"
            )
            ok = ok and rep.ok
        return 0 if ok else 1
    for fid in FIXTURE_IDS:
        print(fid)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trirl", description="query-budgeted hard-label attack engine")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("attack", help="attack a single tensor")
    a.add_argument("--image", required=True, help="input TNSR file")
    a.add_argument("--label", required=True, type=int, help="true label of the image")
    a.add_argument("--oracle", required=True, help="oracle spec, e.g. synthetic:sphere:params.json")
    a.add_argument("--controller", choices=("ta", "tarl"), default="tarl")
    a.add_argument("--budget", type=int, default=500)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--reward", choices=(rl.REWARD_NEG_L2, rl.REWARD_INV_L2), default=rl.REWARD_NEG_L2)
    a.add_argument("--explore-increase-only", action="store_true")
    a.add_argument("--free-init", action="store_true",
                   help="do not count initialization queries against the budget")
    a.add_argument("--dump-qtable", action="store_true")
    a.add_argument("--freq-ratio", type=float, default=0.1)
    a.add_argument("--out", required=True, help="JSONL file to append the result to")
    a.set_defaults(func=cmd_attack)

    b = sub.add_parser("bench", help="attack every image in a manifest")
    b.add_argument("--manifest", required=True)
    b.add_argument("--oracle", required=True)
    b.add_argument("--out-dir", required=True)
    b.add_argument("--budgets", type=lambda s: tuple(int(v) for v in s.split(",")), default=(1000, 500),
                   help="TA,TARL query budgets (default 1000,500)")
    b.add_argument("--c", type=_parse_floats, default=(0.01, 0.05, 0.1, 0.5), help="RMSE constants sweep")
    b.add_argument("--workers", type=int, default=4)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--reward", choices=(rl.REWARD_NEG_L2, rl.REWARD_INV_L2), default=rl.REWARD_NEG_L2)
    b.add_argument("--explore-increase-only", action="store_true")
    b.add_argument("--free-init", action="store_true",
                   help="do not count initialization queries against the budgets")
    b.add_argument("--keep-qtable", action="store_true",
                   help="carry the learned table from image to image (runs sequentially)")
    b.add_argument("--freq-ratio", type=float, default=0.1)
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("report", help="render JSONL results as a table")
    r.add_argument("--in", dest="inputs", nargs="+", required=True)
    r.add_argument("--format", choices=("table", "csv", "json"), default="table")
    r.set_defaults(func=cmd_report)

    f = sub.add_parser("fixtures", help="list or audit the committed failure fixtures")
    f.add_argument("--audit", action="store_true", help="run the brute-force region audits")
    f.set_defaults(func=cmd_fixtures)
    return p


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

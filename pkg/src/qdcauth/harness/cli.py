"""Command-line entry point: ``qdcauth {run,attack,oracle,selftest}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from ..protocol.config import ConfigError
from .oracle import SCENARIOS, enumerate_branches
from .runner import RunConfig, emit_report, report_text, run_trials

EXIT_OK, EXIT_CONFIG, EXIT_ACCEPTANCE = 0, 1, 2


def _load(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.trials is not None:
        cfg = replace(cfg, trials=args.trials)
    return cfg


def _emit(cfg: RunConfig, args) -> int:
    report = run_trials(cfg, workers=args.workers)
    if args.out:
        emit_report(report, args.format, args.out, timing=args.timing)
    else:
        sys.stdout.write(report_text(report, args.format, timing=args.timing))
    return EXIT_OK


def cmd_run(args) -> int:
    return _emit(_load(args), args)


def cmd_attack(args) -> int:
    cfg = replace(_load(args), attack=args.name)
    if args.protocol:
        cfg = replace(cfg, protocol=args.protocol)
    return _emit(cfg, args)


def _fmt(outcome) -> str:
    return json.dumps(outcome, default=str) if not isinstance(outcome, str) else outcome


def cmd_oracle(args) -> int:
    if args.list or not args.scenario:
        print("\n".join(sorted(SCENARIOS)))
        return EXIT_OK
    if args.scenario not in SCENARIOS:
        print(f"unknown scenario {args.scenario!r}; try --list", file=sys.stderr)
        return EXIT_CONFIG
    dist = enumerate_branches(SCENARIOS[args.scenario])
    for outcome, p in sorted(dist.items(), key=lambda kv: repr(kv[0])):
        print(f"{p:.12f}\t{_fmt(outcome)}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_all

    only = set(args.only.split(",")) if args.only else None
    results = run_all(only)
    for r in results:
        print(r.line(), flush=True)
    failed = [r.cid for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} passed" + (f"; failing: {', '.join(failed)}" if failed else ""))
    return EXIT_ACCEPTANCE if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdcauth", description="Mutual-authentication QDC simulator and attack harness")
    sub = p.add_subparsers(dest="command", required=True)

    def trial_opts(sp):
        sp.add_argument("--config", help="JSON file with RunConfig fields")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--out", help="report path (stdout if omitted)")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--timing", action="store_true", help="include wall_time (breaks byte-stability)")

    run = sub.add_parser("run", help="run seeded trials from a config")
    trial_opts(run)
    run.set_defaults(func=cmd_run)

    att = sub.add_parser("attack", help="run trials with an attack strategy")
    att.add_argument("--name", required=True)
    att.add_argument("--protocol", choices=("mutual_qdc", "lee", "zhang"))
    trial_opts(att)
    att.set_defaults(func=cmd_attack)

    orc = sub.add_parser("oracle", help="print an exactly enumerated outcome distribution")
    orc.add_argument("--scenario")
    orc.add_argument("--list", action="store_true")
    orc.set_defaults(func=cmd_oracle)

    st = sub.add_parser("selftest", help="run the acceptance checks")
    st.add_argument("--only", help="comma-separated criterion ids, e.g. 1,8c")
    st.set_defaults(func=cmd_selftest)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

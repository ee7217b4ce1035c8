"""Command-line entry point: ``gch verify-lemmas | run-inflation | validate-solver``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments

log = logging.getLogger("gch")


def _dump(report: dict, out: str | None):
    text = json.dumps(report, indent=2)
    if out:
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        print(text)


def cmd_verify(args) -> int:
    cutoff = None
    if args.plateau is not None or args.support is not None:
        cutoff = (args.plateau if args.plateau is not None else 0.75,
                  args.support if args.support is not None else 4 / 3)
    report = experiments.verify_lemmas(n=args.n, Q=args.Q, family=args.family, cutoff=cutoff)
    _dump(report, args.out)
    return 0 if report["hard_passed"] else 1


def cmd_inflation(args) -> int:
    plan = experiments.ExperimentPlan.from_json(args.plan) if args.plan else experiments.ExperimentPlan()
    if args.out:
        plan.out_csv = args.out
    if args.summary:
        plan.out_summary = args.summary
    elif plan.out_summary is None and plan.out_csv:
        plan.out_summary = str(Path(plan.out_csv).with_suffix(".summary.json"))
    result = experiments.run_inflation(plan)
    for s in result["instances"]:
        log.info("n=%s Q=%s status=%s max_ratio=%s", s["params"]["n"], s["params"]["Q"],
                 s["status"], s.get("max_ratio"))
    if not plan.out_csv and not plan.out_summary:
        result.pop("records")
        _dump(experiments._clean(result), None)
    return 0


def cmd_validate(args) -> int:
    report = experiments.validate_solver()
    _dump(report, args.out)
    return 0 if report["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gch", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify-lemmas", help="certify data supports and measure lemma quantities")
    v.add_argument("--n", type=int, default=16)
    v.add_argument("--Q", type=int, default=2)
    v.add_argument("--family", choices=["paper", "lambda"], default="paper")
    v.add_argument("--out")
    v.add_argument("--plateau", type=float, help="override the LP cutoff plateau radius")
    v.add_argument("--support", type=float, help="override the LP cutoff support radius")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("run-inflation", help="evolve the inflation data and record norms")
    r.add_argument("--plan", help="JSON plan file")
    r.add_argument("--out", help="diagnostics CSV")
    r.add_argument("--summary", help="JSON summary (defaults next to the CSV)")
    r.set_defaults(func=cmd_inflation)

    s = sub.add_parser("validate-solver", help="convergence, conservation and steady-state checks")
    s.add_argument("--out")
    s.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

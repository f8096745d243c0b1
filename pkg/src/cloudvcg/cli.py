"""``auction`` command line: run, sweep, verify, compare, gen, report, settle.

Exit codes are stable and encode the auction economics so scripts can test
mechanism properties without parsing output.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import ledger as ledger_mod
from .market import (
    BUDGET_EXCEEDED,
    INFEASIBLE,
    MONOPOLY,
    SUCCESS,
    Mechanism,
    ValidationError,
    load_scenario,
    serialize_scenario,
)
from .solver import BRUTEFORCE_CAP
from .strategy import (
    DEFAULT_GRID,
    GenParams,
    compare_mechanisms,
    deviation_sweep,
    generate_scenario,
    run_auction,
    verify_strategyproof,
)

EXIT_SUCCESS = 0
EXIT_INFEASIBLE = 1
EXIT_BUDGET_EXCEEDED = 2
EXIT_VALIDATION = 3
EXIT_IO = 4
EXIT_MONOPOLY = 5
EXIT_VERIFICATION_FAILED = 6

STATUS_EXIT = {
    SUCCESS: EXIT_SUCCESS,
    INFEASIBLE: EXIT_INFEASIBLE,
    BUDGET_EXCEEDED: EXIT_BUDGET_EXCEEDED,
    MONOPOLY: EXIT_MONOPOLY,
}

log = logging.getLogger("cloudvcg")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage, which would collide with BudgetExceeded
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _emit(obj, out: Optional[str]) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _mechanism(text: str) -> Mechanism:
    try:
        return Mechanism.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _grid(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; expected comma-separated basis points")


def _figure(fn, *args, path) -> None:
    if path:
        from . import plotting

        getattr(plotting, fn)(*args, path)


def cmd_run(args) -> int:
    s = load_scenario(args.scenario)
    outcome = run_auction(s, args.mechanism)
    _emit(outcome.to_json(), args.out)
    if args.ledger:
        rec = ledger_mod.append_record(args.ledger, outcome, ledger_mod.clock_from_env())
        log.info("appended record %d to %s", rec.record_id, args.ledger)
    return STATUS_EXIT[outcome.status.kind]


def cmd_sweep(args) -> int:
    s = load_scenario(args.scenario)
    report = deviation_sweep(s, args.provider, args.mechanism, args.grid, enforce_budget=args.enforce_budget)
    _emit(report.to_json(), args.out)
    _figure("plot_sweep", report, path=args.figure)
    return EXIT_VERIFICATION_FAILED if report.max_gain > 0 else EXIT_SUCCESS


def _gen_params(args) -> GenParams:
    params = GenParams(
        n_tasks=args.tasks,
        offers_per_task=args.offers,
        cost_range=(args.cost_lo, args.cost_hi),
        quality_range=(args.quality_lo, args.quality_hi),
        threshold_fraction_bp=args.threshold_bp,
    )
    params.check()
    return params


def cmd_verify(args) -> int:
    params = _gen_params(args)
    if args.seeds < 0:
        raise UsageError("--seeds must be nonnegative")
    if math.prod([params.offers_per_task] * params.n_tasks) > BRUTEFORCE_CAP:
        raise UsageError("instance size exceeds the brute-force oracle cap")
    seeds = range(args.seed_start, args.seed_start + args.seeds)
    report = verify_strategyproof(seeds, params, args.grid, args.mechanism, enforce_budget=args.enforce_budget)
    _emit(report.to_json(), args.out)
    _figure("plot_verify", report, path=args.figure)
    return EXIT_SUCCESS if report.passed else EXIT_VERIFICATION_FAILED


def format_table(rows) -> str:
    header = ("mechanism", "status", "consumer_total", "social_cost", "surplus")
    body = [
        (
            str(r.mechanism),
            str(r.status),
            "-" if r.consumer_total is None else str(r.consumer_total),
            "-" if r.social_cost_true is None else str(r.social_cost_true),
            "-" if r.provider_surplus is None else str(r.provider_surplus),
        )
        for r in rows
    ]
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
    lines = []
    for row in [header, *body]:
        cells = [c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def cmd_compare(args) -> int:
    if args.markup < 0:
        raise UsageError("--markup must be nonnegative")
    s = load_scenario(args.scenario)
    rows = compare_mechanisms(s, args.markup)
    _emit({"rows": [r.to_json() for r in rows]}, args.out)
    sys.stderr.write(format_table(rows))
    _figure("plot_comparison", rows, path=args.figure)
    if any(r.status.ok for r in rows):
        return EXIT_SUCCESS
    # first-price is the least demanding rule; its failure explains the others
    return STATUS_EXIT[rows[1].status.kind]


def cmd_gen(args) -> int:
    s = generate_scenario(_gen_params(args), args.seed)
    text = serialize_scenario(s, indent=2)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_SUCCESS


def cmd_report(args) -> int:
    report = ledger_mod.build_report(args.ledger)
    _emit(report.to_json(), args.out)
    _figure("plot_revenue", report, path=args.figure)
    return EXIT_SUCCESS


def cmd_settle(args) -> int:
    rec = ledger_mod.settle(args.ledger, args.record, args.reference, ledger_mod.clock_from_env())
    _emit(rec.to_json(), args.out)
    return EXIT_SUCCESS


def _add_gen_args(p, *, tasks_default=3, offers_default=3) -> None:
    p.add_argument("--tasks", type=int, default=tasks_default)
    p.add_argument("--offers", type=int, default=offers_default, help="offers (distinct providers) per task")
    p.add_argument("--cost-lo", type=int, default=1, help="cents")
    p.add_argument("--cost-hi", type=int, default=10_000, help="cents")
    p.add_argument("--quality-lo", type=int, default=0)
    p.add_argument("--quality-hi", type=int, default=5)
    p.add_argument("--threshold-bp", type=int, default=6000,
                   help="quality threshold as a fraction of the best attainable quality")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="auction", description="Strategy-proof reverse auctions for service composition.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="select and price one composition")
    p.add_argument("--scenario", required=True)
    p.add_argument("--mechanism", type=_mechanism, default=Mechanism.parse("vcg"),
                   help="vcg | first-price | posted:MARKUPBP")
    p.add_argument("--ledger")
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="scale one provider's bids over a multiplier grid")
    p.add_argument("--scenario", required=True)
    p.add_argument("--provider", required=True)
    p.add_argument("--mechanism", type=_mechanism, default=Mechanism.parse("vcg"))
    p.add_argument("--grid", type=_grid, default=DEFAULT_GRID, help="basis points, must include 10000")
    p.add_argument("--enforce-budget", action="store_true", help="let the consumer budget fail deviations")
    p.add_argument("--out")
    p.add_argument("--figure", help="write a utility-vs-multiplier plot")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="sweep every provider of generated scenarios")
    p.add_argument("--seeds", type=int, required=True, help="number of seeds")
    p.add_argument("--seed-start", type=int, default=1)
    p.add_argument("--mechanism", type=_mechanism, default=Mechanism.parse("vcg"))
    p.add_argument("--grid", type=_grid, default=DEFAULT_GRID)
    p.add_argument("--enforce-budget", action="store_true")
    _add_gen_args(p)
    p.add_argument("--out")
    p.add_argument("--figure", help="write a per-seed max-gain plot")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compare", help="price the truthful allocation under every mechanism")
    p.add_argument("--scenario", required=True)
    p.add_argument("--markup", type=int, default=0, help="posted-price markup in basis points")
    p.add_argument("--out")
    p.add_argument("--figure")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen", help="write a random scenario")
    _add_gen_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("report", help="aggregate a ledger")
    p.add_argument("--ledger", required=True)
    p.add_argument("--out")
    p.add_argument("--figure", help="write a provider revenue chart")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("settle", help="record third-party settlement of a ledger record")
    p.add_argument("--ledger", required=True)
    p.add_argument("--record", type=int, required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_settle)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, UsageError, ledger_mod.NotFound,
            ledger_mod.AlreadySettled, ledger_mod.NotSettleable, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ledger_mod.CorruptLedger, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""``censorcost`` command line: run, eval, sweep, validate.

Exit status 0 on success, 2 for usage or configuration errors (the message
names the offending field), 1 for anything that fails at run time.
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .armsrace import CSV_COLUMNS, Scenario, grand_total, run_scenario
from .errors import ConfigError
from .evaluation import compare_tools, evaluate_tool
from .reports import (
    SCORE_COLUMNS, atomic_write, cycles_rows, score_rows, text_table, write_csv,
    write_cycles_csv, write_json, write_scores_csv,
)
from .scenario import STOCK_SCENARIOS, apply_overrides, parse_scenario, read_config, scenario_to_dict

USAGE_ERROR = 2
RUNTIME_ERROR = 1


class UsageError(Exception):
    pass


def _load(args) -> Scenario:
    overrides = list(args.override or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    if getattr(args, "frozen_classifier", False):
        overrides.append("run.frozen_classifier=true")
    return parse_scenario(apply_overrides(read_config(args.scenario), overrides))


def _ranking(s: Scenario):
    return compare_tools(list(s.tools.values()), s, flags=True) if len(s.tools) >= 2 else None


def cmd_run(args) -> int:
    s = _load(args)
    reports = run_scenario(s)
    out = Path(args.out)
    total = grand_total(reports)
    final = reports[-1].confusion
    report = {
        "scenario": s.name,
        "seed": s.seed,
        "frozen_classifier": s.frozen_classifier,
        "cycles": [r.as_dict() for r in reports],
        "grand_total": total,
        "final": {"fn_rate": final.fn_rate, "fp_rate": final.fp_rate},
    }
    ranked = _ranking(s)
    if ranked is not None:
        report["demand"] = {"max_fn_rate": s.demand.max_fn_rate, "max_fp_rate": s.demand.max_fp_rate}
        report["ranking"] = [dict(sc.as_dict(), rank=i) for i, sc in enumerate(ranked, 1)]
    write_json(out / "scenario.json", scenario_to_dict(s))
    write_cycles_csv(out / "cycles.csv", reports)
    write_json(out / "report.json", report)

    print(text_table(CSV_COLUMNS, cycles_rows(reports)), end="")
    if ranked is not None:
        print()
        print(text_table(SCORE_COLUMNS, score_rows(ranked)), end="")
    print(f"grand total: {total:.6f}")
    print(f"final fn_rate: {final.fn_rate:.4f}  fp_rate: {final.fp_rate:.4f}")
    return 0


def cmd_eval(args) -> int:
    s = _load(args)
    ids = list(s.tools) if args.all else list(args.tools)
    if not ids:
        raise UsageError("eval needs at least one tool id (or --all)")
    for tid in ids:
        if tid not in s.tools:
            raise ConfigError("tools", f"unknown tool id {tid!r}; declared: {sorted(s.tools)}")
    tools = [s.tools[t] for t in ids]
    ranked = compare_tools(tools, s, flags=True) if len(tools) > 1 else [evaluate_tool(tools[0], s)]
    out = Path(args.out)
    rows = score_rows(ranked)
    write_scores_csv(out / "tool_scores.csv", ranked)
    atomic_write(out / "tool_scores.txt", text_table(SCORE_COLUMNS, rows))
    print(text_table(SCORE_COLUMNS, rows), end="")
    return 0


def _sweep_one(job):
    raw, seed = job
    s = parse_scenario(apply_overrides(raw, [f"seed={seed}"]))
    return seed, run_scenario(s)


def cmd_sweep(args) -> int:
    raw = apply_overrides(read_config(args.scenario), list(args.override or []))
    if args.frozen_classifier:
        raw = apply_overrides(raw, ["run.frozen_classifier=true"])
    parse_scenario(raw)  # fail fast on schema errors
    jobs = [(raw, seed) for seed in args.seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]

    rows, summary = [], []
    for seed, reports in results:
        rows += [dict(r.row(), seed=seed) for r in reports]
        last = reports[-1].confusion
        summary.append({"seed": seed, "grand_total": grand_total(reports),
                        "final_fn_rate": last.fn_rate, "final_fp_rate": last.fp_rate})
    out = Path(args.out)
    write_csv(out / "sweep.csv", ("seed",) + CSV_COLUMNS, rows)
    write_json(out / "sweep.json", summary)
    print(text_table(("seed", "grand_total", "final_fn_rate", "final_fp_rate"), summary), end="")
    return 0


def cmd_validate(args) -> int:
    s = _load(args)
    print(f"ok: {s.name} ({len(s.catalog)} features, {len(s.tools)} tools, {s.n_cycles} cycles)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="censorcost",
                                description="Censor-versus-evader cost simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True, seed=True):
        sp.add_argument("scenario",
                        help=f"scenario file, or a stock name: {', '.join(STOCK_SCENARIOS)}")
        sp.add_argument("--override", "-O", action="append", metavar="KEY=VALUE",
                        help="set a dotted config path, e.g. traffic.n_flows=500 (repeatable)")
        sp.add_argument("--frozen-classifier", action="store_true",
                        help="keep the previous classifier in cycles where the tool changes")
        if seed:
            sp.add_argument("--seed", type=int, help="master seed (overrides the file)")
        if out:
            sp.add_argument("--out", default="censorcost-out", help="output directory")

    sp = sub.add_parser("run", help="run the arms race and write cycle reports")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("eval", help="score and rank evasion tools")
    common(sp)
    sp.add_argument("tools", nargs="*", help="tool ids declared in the scenario")
    sp.add_argument("--all", action="store_true", help="evaluate every declared tool")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("sweep", help="run one scenario over several seeds")
    common(sp, seed=False)
    sp.add_argument("--seeds", type=int, nargs="+", required=True)
    sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("validate", help="check a scenario file against the schema")
    common(sp, out=False)
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    # a nargs="*" positional cannot follow options in a subcommand, so collect strays here
    args, extra = parser.parse_known_args(argv)
    if extra and (args.command != "eval" or any(x.startswith("-") for x in extra)):
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    if extra:
        args.tools = list(args.tools) + extra
    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"censorcost: error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except ConfigError as e:
        print(f"censorcost: config error: {e.field}: {e.message}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as e:  # noqa: BLE001 - report, don't traceback
        print(f"censorcost: error: {type(e).__name__}: {e}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())

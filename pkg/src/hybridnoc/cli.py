"""Command-line experiment runner.

Exit status: 0 on success, 1 for configuration errors, 2 when a simulation
fails to drain or hits a protocol error.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from . import moclib
from .clayer import CLayer, parse_schedules
from .config import load_topology
from .errors import ConfigError, NocError, SizeOutOfRange, UnknownIp, UnservedCircuit
from .plan import ACCOUNTING_CHOICES, parse_plan, run_plan

EXIT_OK, EXIT_CONFIG, EXIT_PATHOLOGY = 0, 1, 2
CONFIG_ERRORS = (ConfigError, UnknownIp, UnservedCircuit, SizeOutOfRange)


def _accountings(choice: str):
    return tuple(moclib.Accounting) if choice == "both" else (moclib.Accounting(choice),)


def _emit(out: Optional[str], name: str, text: str) -> None:
    if out is None:
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / name).write_text(text)


def cmd_simulate(args) -> int:
    plan = parse_plan(args.plan)
    art = run_plan(plan, jobs=args.jobs, trace=args.trace, accounting=args.accounting)
    out = args.out or plan.out
    if out is None:
        out = plan.path.parent / "results"
    paths = art.write(out)
    sys.stdout.write(art.files["summary.txt"])
    print(f"wrote {len(paths)} files to {out}")
    for r in art.results:
        if not r.drained:
            print(f"error: {r.label} did not drain: {r.error or 'in-flight traffic at end of run'}",
                  file=sys.stderr)
    return EXIT_OK if art.all_drained else EXIT_PATHOLOGY


def cmd_figure6(args) -> int:
    lib = moclib.load_library(args.library) if args.library else None
    rep = moclib.area_matched_comparison(lib, args.tolerance, _accountings(args.accounting or "both"),
                                         args.c_slot_share)
    csv_text = rep.to_csv()
    if args.out:
        _emit(args.out, "gain_report.csv", csv_text)
        _emit(args.out, "summary.txt", rep.summary() + "\n")
    else:
        sys.stdout.write(csv_text)
    print(rep.summary())
    return EXIT_OK


def cmd_moclib_table(args) -> int:
    lib = moclib.load_library(args.library) if args.library else None
    sys.stdout.write(moclib.table_text(lib))
    if args.fit:
        m = moclib.scale_model(lib)
        print(m.report())
    _emit(args.out, "moclib_table.csv", moclib.table_csv(lib))
    _emit(args.out, "schedule_memory.csv", moclib.schedule_memory_csv())
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.plan:
        plan = parse_plan(args.plan)
        print(f"{args.plan}: ok ({len(plan.points())} sweep point(s), "
              f"{len(plan.topology.ip_assignments)} IPs, {len(plan.schedules)} schedule(s))")
        return EXIT_OK
    if not args.topology:
        print("error: validate needs --plan or --topology", file=sys.stderr)
        return EXIT_CONFIG
    topo = load_topology(args.topology)
    scheds = {}
    if args.schedule:
        scheds = parse_schedules(Path(args.schedule).read_text(), args.schedule)
    problems: List[str] = []
    for c, s in scheds.items():
        members = topo.c_members(c)
        if not members:
            problems.append(f"{args.schedule}: router {c} has a schedule but no C-layer IPs")
            continue
        try:
            CLayer(members.keys()).load_schedule(s)
        except ConfigError as e:
            problems.append(f"{args.schedule}: router {c}: {e}")
    if problems:
        raise ConfigError("\n".join(problems), problems)
    print(f"{args.topology}: ok ({topo.width}x{topo.height} mesh, {len(topo.ip_assignments)} IPs)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hybridnoc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run every sweep point of a plan")
    s.add_argument("--plan", required=True)
    s.add_argument("--out", help="output directory (default: the plan's 'out', else ./results next to it)")
    s.add_argument("--trace", action="store_true", help="also write per-point event traces")
    s.add_argument("--jobs", type=int, default=1, help="worker processes for sweep points")
    s.add_argument("--accounting", choices=ACCOUNTING_CHOICES)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("figure6", help="area-matched hybrid vs baseline bandwidth comparison")
    f.add_argument("--out")
    f.add_argument("--accounting", choices=ACCOUNTING_CHOICES, default="both")
    f.add_argument("--tolerance", type=float, default=moclib.DEFAULT_TOLERANCE_PCT, help="area tolerance, %%")
    f.add_argument("--c-slot-share", type=float, default=moclib.DEFAULT_C_SLOT_SHARE)
    f.add_argument("--library", help="calibration CSV (default: built-in tables)")
    f.set_defaults(func=cmd_figure6)

    m = sub.add_parser("moclib-table", help="print the calibration tables")
    m.add_argument("--out")
    m.add_argument("--library")
    m.add_argument("--fit", action="store_true", help="also print the per-port scaling fit")
    m.set_defaults(func=cmd_moclib_table)

    v = sub.add_parser("validate", help="check a plan, or a topology and schedule file")
    v.add_argument("--plan")
    v.add_argument("--topology")
    v.add_argument("--schedule")
    v.set_defaults(func=cmd_validate)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CONFIG_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NocError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_PATHOLOGY


if __name__ == "__main__":
    sys.exit(main())

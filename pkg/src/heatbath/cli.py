"""Command-line interface.

Subcommands: `verify` (machine-checked reproduction of the worked
examples), `evolve` (apply a schedule to an initial state and dump the
measure), `compare` (one insertion experiment), `search` (exhaustive
violation search, streaming JSON lines), and `potts-sweep` (coupling grid
as CSV).

Exit codes: 0 success, 1 a verification check failed, 2 usage or parse
error, 3 a resource cap was exceeded.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .censoring import (
    InsertionExperiment,
    SearchConfig,
    VERIFICATIONS,
    compare_insertion,
    expand_family,
    search,
    stationary_target,
    verify_mn1,
    verify_perm_counterexample,
)
from .dynamics import KernelCache, apply, parse_schedule
from .errors import HeatbathError, ScheduleSyntaxError, StateCapExceeded
from .measure import (
    EXACT,
    measure_to_json,
    point_measure,
    scalar_to_json,
    tv_distance,
)
from .statespace import canonical_start, parse_initial_state, parse_space_spec

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_CAP = 3


def _common_flags(p: argparse.ArgumentParser):
    p.add_argument("--mode", choices=["exact", "float"], default="exact")
    p.add_argument("--metric", choices=["tv", "l2"], default="tv")
    p.add_argument("--out", metavar="PATH", default=None)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--max-states", type=int, default=10**6)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatbath",
        description="Exact heat-bath dynamics and censoring experiments on finite spaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the built-in verification suites")
    p.add_argument(
        "--which",
        choices=["all", "perm", "coloring", "mn1", "alternative", "block", "potts"],
        default="all",
    )
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--N", type=int, default=None)
    _common_flags(p)

    p = sub.add_parser("evolve", help="apply a schedule and write the final measure")
    p.add_argument("--space", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--initial", default=None)
    _common_flags(p)

    p = sub.add_parser("compare", help="one insertion experiment")
    p.add_argument("--space", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--at", type=int, required=True, help="insert after this flattened position")
    p.add_argument("--extra", required=True, help="the op to insert")
    p.add_argument("--initial", default=None)
    _common_flags(p)

    p = sub.add_parser("search", help="exhaustive violation search")
    p.add_argument("--space", required=True)
    p.add_argument("--family", required=True, help="op family pattern, e.g. 't(*,4)'")
    p.add_argument("--max-len", type=int, default=4)
    p.add_argument("--initial", default=None)
    p.add_argument("--stop-at-first", action="store_true")
    p.add_argument("--record-all", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--max-candidates", type=int, default=1_000_000)
    _common_flags(p)

    p = sub.add_parser("potts-sweep", help="antiferro Potts coupling sweep (CSV)")
    p.add_argument("--space", default="potts:triangle:q=4")
    p.add_argument("--J-grid", default=None, help="comma list or start:stop:step")
    p.add_argument("--w-grid", default=None, help="comma list of rationals (exact mode)")
    _common_flags(p)
    return parser


def _write_out(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")
    else:
        print(text)


def _report_failures(reports) -> int:
    for report in reports:
        for check in report["checks"]:
            if not check["passed"]:
                print(
                    f"FAILED {report['name']}.{check['check']}: {check['detail']}",
                    file=sys.stderr,
                )
                return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_verify(args) -> int:
    which = args.which
    reports = []
    if which in ("perm", "all"):
        if args.mode == "float":
            M = args.M if args.M is not None else 64
            N = args.N if args.N is not None else 64
        else:
            M = args.M if args.M is not None else 1
            N = args.N if args.N is not None else 1
        reports.append(verify_perm_counterexample(M, N, args.mode))
    if which in ("coloring", "all"):
        reports.append(
            VERIFICATIONS["coloring"](args.M or 1, args.N or 1, args.mode)
        )
    if which in ("mn1", "all"):
        reports.append(verify_mn1(EXACT))
    if which in ("alternative", "all"):
        reports.append(VERIFICATIONS["alternative"](args.M if args.M is not None else 1, args.mode))
    if which in ("block", "all"):
        reports.append(VERIFICATIONS["block"](args.mode))
    if which in ("potts", "all"):
        if args.mode == "exact":
            w_grid = [Fraction(1), Fraction(1, 2), Fraction(1, 10), Fraction(0)]
            reports.append(VERIFICATIONS["potts"](mode="exact", w_grid=w_grid))
        else:
            reports.append(VERIFICATIONS["potts"](mode="float"))
    payload = reports[0] if len(reports) == 1 else {"reports": reports}
    _write_out(json.dumps(payload, indent=2, default=str), args.out)
    return _report_failures(reports)


def _load_space_and_start(args):
    space = parse_space_spec(args.space, cap=args.max_states)
    if args.initial:
        state = parse_initial_state(space, args.initial)
    else:
        state = canonical_start(space)
    return space, point_measure(space, state, args.mode)


def cmd_evolve(args) -> int:
    space, m = _load_space_and_start(args)
    schedule = parse_schedule(args.schedule)
    cache = KernelCache(space, args.mode)
    ops = schedule.flatten()
    for op in ops:
        m = apply(m, cache.get(op))
    target = stationary_target(space, ops, args.mode)
    print(
        f"tv_to_stationary = {scalar_to_json(tv_distance(m, target), args.mode)}",
        file=sys.stderr,
    )
    if args.format == "csv":
        lines = ["state,p"]
        for i, w in enumerate(m.weights):
            if w:
                state = " ".join(str(x) for x in space.states[i])
                lines.append(f"{state},{scalar_to_json(w, args.mode)}")
        _write_out("\n".join(lines), args.out)
    else:
        _write_out(measure_to_json(m), args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    space, m = _load_space_and_start(args)
    base = parse_schedule(args.schedule)
    extra_sched = parse_schedule(args.extra)
    flat_extra = extra_sched.flatten()
    if len(flat_extra) != 1:
        raise ScheduleSyntaxError("--extra must be a single op")
    experiment = InsertionExperiment(m, base, args.at, flat_extra[0], args.metric)
    result = compare_insertion(experiment)
    payload = result.to_json_dict(experiment)
    _write_out(json.dumps(payload, indent=2), args.out)
    return EXIT_OK


def cmd_search(args) -> int:
    space = parse_space_spec(args.space, cap=args.max_states)
    family = expand_family(space, args.family)
    if args.initial:
        initial = point_measure(space, parse_initial_state(space, args.initial), args.mode)
    else:
        initial = None
    cfg = SearchConfig(
        space=space,
        family=family,
        max_len=args.max_len,
        initial=initial,
        metric=args.metric,
        mode=args.mode,
        stop_at_first=args.stop_at_first,
        record_all=args.record_all,
        max_candidates=args.max_candidates,
        workers=args.workers,
    )
    lines = []

    def stream(v):
        line = json.dumps(v.to_json_dict(cfg.mode, cfg.metric))
        print(line)
        lines.append(line)

    report = search(cfg, on_violation=stream if cfg.workers <= 1 else None)
    if cfg.workers > 1:
        for v in report.violations:
            stream(v)
    summary = json.dumps({"summary": report.summary(cfg)})
    print(summary)
    lines.append(summary)
    if args.out:
        _write_out("\n".join(lines), args.out)
    if args.record_all and report.results is not None and args.out:
        with open(args.out + ".results.json", "w", encoding="utf-8") as fh:
            json.dump(report.results, fh, indent=2)
    return EXIT_OK


def _parse_grid(text: str):
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        grid = []
        x = start
        while x <= stop + 1e-12:
            grid.append(round(x, 10))
            x += step
        return grid
    return [float(x) for x in text.split(",")]


def cmd_potts_sweep(args) -> int:
    from .censoring import verify_potts_antiferro

    # the grid decides the mode: rational w values run exact, J values float
    if args.w_grid:
        w_grid = [Fraction(x) for x in args.w_grid.split(",")]
        report = verify_potts_antiferro(mode="exact", w_grid=w_grid)
        key = "w"
    else:
        J_grid = _parse_grid(args.J_grid) if args.J_grid else None
        report = verify_potts_antiferro(J_grid=J_grid, mode="float")
        key = "J"
    if args.format == "json":
        _write_out(json.dumps(report, indent=2, default=str), args.out)
    else:
        lines = [f"{key},kernel_deviation,d_mu,d_nu,violation,threshold"]
        for i, row in enumerate(report["rows"]):
            is_thr = report["threshold_index"] is not None and i == report["threshold_index"]
            lines.append(
                f"{row[key]},{row['kernel_deviation']!r},{row['d_mu']},"
                f"{row['d_nu']},{int(row['violation'])},{int(is_thr)}"
            )
        _write_out("\n".join(lines), args.out)
    return _report_failures([report])


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "verify": cmd_verify,
        "evolve": cmd_evolve,
        "compare": cmd_compare,
        "search": cmd_search,
        "potts-sweep": cmd_potts_sweep,
    }
    try:
        return handlers[args.command](args)
    except StateCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ScheduleSyntaxError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HeatbathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())

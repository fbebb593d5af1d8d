import argparse
import logging
import sys
import time

import pandas as pd

from config import (
    EXIT_OK,
    EXIT_RESOURCE,
    EXIT_USAGE,
    EXIT_VERIFICATION_FAILED,
    get_effective_settings,
)
from momdp_core import DomainError, ResourceError, Space
from cover_grid import (
    CellQueryError,
    ExplicitBackend,
    LpBackend,
    lorenz_grid_cover,
    pareto_grid_cover,
    two_phase_lorenz_cover,
)
from cover_greedy import greedy_min_cover
from oracle import enumerate_deterministic_values, verify_cover
from instance_io import random_instance, resolve_input, save_instance
from report_generation import ReportGenerator
from analysis_functions import compare_methods, grid_bounds, cover_size_table

logger = logging.getLogger("momdp_cover")

METHODS = ("grid", "two-phase", "greedy")


# --- Command Functions ---

def _backend(resolved, args):
    if resolved.is_explicit:
        if args.deterministic:
            logger.warning("--deterministic has no effect on a closed-form value set")
        return ExplicitBackend(resolved.values)
    solver = get_effective_settings("solver", args.profile)
    return LpBackend(resolved.momdp, args.deterministic, solver)


def _grid_settings(args) -> dict:
    return get_effective_settings("grid", overrides={
        "jobs": args.jobs,
        "skip_ahead": False if args.no_skip else None,
    })


def build_cover(resolved, args):
    """Run the requested covering method; returns the CoverSet."""
    space = Space(args.space)
    backend = _backend(resolved, args)
    settings = _grid_settings(args)
    if args.method == "greedy":
        cover, trace = greedy_min_cover(backend, args.epsilon, space)
        logger.info(f"greedy: {trace.restrict_calls} Restrict calls ({trace.status})")
        return cover
    if args.method == "two-phase":
        if space is not Space.LORENZ:
            raise DomainError("the two-phase method builds Lorenz covers; use --space lorenz.")
        return two_phase_lorenz_cover(backend, args.epsilon, settings)
    if space is Space.LORENZ:
        return lorenz_grid_cover(backend, args.epsilon, settings)
    return pareto_grid_cover(backend, args.epsilon, settings)


def cmd_gen(args) -> int:
    m = random_instance(args.seed, args.states, args.actions, args.objectives)
    save_instance(m, args.out)
    print(f"wrote {m.name} to {args.out}")
    return EXIT_OK


def cmd_cover(args) -> int:
    resolved = resolve_input(args.input)
    started = time.perf_counter()
    cover = build_cover(resolved, args)
    seconds = time.perf_counter() - started
    logger.info(f"cover built in {seconds:.3f}s with {cover.queries} backend queries")

    report = ReportGenerator(resolved.label, args.export_profile)
    cover_df = report.cover_table(cover)
    print(f"cover size: {len(cover)}")
    print(f"backend queries: {cover.queries}")
    print(f"wall-clock seconds: {seconds:.3f}")
    if args.out:
        report.write_table(cover_df, args.out)
    else:
        print(cover_df.to_csv(sep=report.settings["delimiter"], index=False, lineterminator="\n"), end="")

    frontier_df = None
    if args.plot or args.excel:
        source = resolved.values if resolved.is_explicit else None
        if source is not None:
            frontier_df = report.frontier_table(source, cover.space)
    if args.plot:
        report.write_table(report.plot_data(cover, frontier_df), args.plot)
    if args.excel:
        summary = report.summary_table({
            "space": cover.space.value,
            "method": args.method,
            "epsilon": args.epsilon,
            "deterministic": bool(args.deterministic),
            "size": len(cover),
            "queries": cover.queries,
            "cells": cover.cells,
            "skipped_cells": cover.skipped,
            "seconds": round(seconds, 3),
        })
        report.export_to_excel({
            "cover": cover_df,
            "frontier": frontier_df,
            "summary": summary,
            "policies": report.policies_table(cover),
        }, args.excel)
    return EXIT_OK


def cmd_check(args) -> int:
    resolved = resolve_input(args.input)
    cover = build_cover(resolved, args)
    if resolved.is_explicit:
        exact = resolved.values
    else:
        exact = enumerate_deterministic_values(resolved.momdp, jobs=args.jobs if args.jobs is not None else 1)
    verdict = verify_cover(cover, exact, args.epsilon, Space(args.space))
    print(f"cover size: {len(cover)}")
    print(f"nondominated points checked: {verdict.checked}")
    if verdict:
        print("verification: ok")
        return EXIT_OK
    print(f"verification: FAILED, uncovered point {list(verdict.witness)}")
    return EXIT_VERIFICATION_FAILED


def cmd_stats(args) -> int:
    resolved = resolve_input(args.input)
    if resolved.is_explicit:
        values = resolved.values
        print(f"value set: {resolved.label}, {len(values)} points")
        n, bound = 2, ExplicitBackend(values).value_bound()
    else:
        m = resolved.momdp
        print(f"instance: {m.name or resolved.label}")
        print(f"states: {m.num_states}  actions: {m.num_actions}  objectives: {m.num_objectives}  "
              f"discount: {m.discount!r}")
        print(f"deterministic policies: {m.num_actions ** m.num_states}")
        n, bound = m.num_objectives, m.value_bound()
    floor = get_effective_settings("grid")["floor"]
    for eps in args.epsilon:
        bounds = grid_bounds(n, eps, bound, floor)
        print(pd.Series(bounds).to_string())
        print()
    return EXIT_OK


def cmd_sizes(args) -> int:
    resolved = resolve_input(args.input)
    if not resolved.is_explicit:
        raise DomainError("sizes runs on a closed-form value set, e.g. builtin:example2:30.")
    df = cover_size_table(resolved.values, args.epsilon, _grid_settings(args))
    print(df.to_string())
    if args.out:
        ReportGenerator(resolved.label, args.export_profile).write_table(df.reset_index(names="row"), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    instances = [random_instance(seed, args.states, args.actions, args.objectives) for seed in args.seeds]
    df = compare_methods(instances, args.epsilon[0], args.deterministic, _grid_settings(args))
    print(df.to_string(index=False))
    if args.out:
        ReportGenerator("bench", args.export_profile).write_table(df, args.out)
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "cover": cmd_cover,
    "check": cmd_check,
    "stats": cmd_stats,
    "sizes": cmd_sizes,
    "bench": cmd_bench,
}


# --- Argument parsing ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="momdp-cover",
                                     description="Epsilon-covers of Pareto and Lorenz optimal tradeoffs in MOMDPs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a seeded random instance")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--states", type=int, required=True)
    gen.add_argument("--actions", type=int, required=True)
    gen.add_argument("--objectives", type=int, default=2)
    gen.add_argument("--out", required=True)

    def run_options(p, with_outputs: bool):
        p.add_argument("--in", dest="input", required=True,
                       help="instance file or builtin:example1:N / builtin:example2:N / builtin:example1-mdp:N")
        p.add_argument("--space", choices=[s.value for s in Space], default=Space.LORENZ.value)
        p.add_argument("--method", choices=METHODS, default="grid")
        p.add_argument("--epsilon", type=float, required=True)
        p.add_argument("--deterministic", action="store_true", help="deterministic policies only (MIP)")
        p.add_argument("--jobs", type=int, default=None, help="parallel cell queries (needs --no-skip)")
        p.add_argument("--no-skip", action="store_true", help="query every grid cell")
        p.add_argument("--profile", default=None, help="solver profile (strict, fast)")
        p.add_argument("--export-profile", default=None, help="export profile (csv)")
        if with_outputs:
            p.add_argument("--out", help="cover table file (default: stdout)")
            p.add_argument("--plot", help="plot-data file")
            p.add_argument("--excel", help="Excel workbook")

    run_options(sub.add_parser("cover", help="compute an epsilon-cover"), True)
    run_options(sub.add_parser("check", help="compute a cover and verify it against the exact frontier"), False)

    stats = sub.add_parser("stats", help="instance summary and grid-size bounds")
    stats.add_argument("--in", dest="input", required=True)
    stats.add_argument("--epsilon", type=float, nargs="+", default=[0.1])

    sizes = sub.add_parser("sizes", help="cover sizes of every method over several epsilons")
    sizes.add_argument("--in", dest="input", default="builtin:example2:30")
    sizes.add_argument("--epsilon", type=float, nargs="+", default=[0.05, 0.1, 0.15, 0.2])
    sizes.add_argument("--jobs", type=int, default=None)
    sizes.add_argument("--no-skip", action="store_true")
    sizes.add_argument("--out")
    sizes.add_argument("--export-profile", default=None)

    bench = sub.add_parser("bench", help="direct vs two-phase Lorenz covers on random instances")
    bench.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    bench.add_argument("--states", type=int, default=20)
    bench.add_argument("--actions", type=int, default=5)
    bench.add_argument("--objectives", type=int, default=3)
    bench.add_argument("--epsilon", type=float, nargs=1, default=[0.1])
    bench.add_argument("--deterministic", action="store_true")
    bench.add_argument("--jobs", type=int, default=None)
    bench.add_argument("--no-skip", action="store_true")
    bench.add_argument("--out")
    bench.add_argument("--export-profile", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except CellQueryError as e:
        logger.error(str(e))
        return EXIT_RESOURCE if isinstance(e.cause, ResourceError) else EXIT_USAGE
    except ResourceError as e:
        logger.error(f"{e} (reason: {e.reason})")
        return EXIT_RESOURCE
    except (DomainError, KeyError, OSError) as e:
        logger.error(str(e))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

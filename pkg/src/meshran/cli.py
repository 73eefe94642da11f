"""Command-line entry point: ``meshran run | compare | validate``.

Exit codes: 0 success, 2 validation error or no feasible cell, 3 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .report import compare_matrix
from .scenario import Scenario, bundled_scenarios, cell_problem, load_scenario
from .topology import ValidationError

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3

log = logging.getLogger("meshran")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="meshran", description=(
        "Mesh RAN session-establishment simulator. Scenario arguments are YAML files or the "
        f"names of bundled scenarios ({', '.join(bundled_scenarios())})."))
    sub = p.add_subparsers(dest="command", required=True)

    def common(cmd: argparse.ArgumentParser) -> None:
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the scenario seed (also MESHRAN_SEED)")
        cmd.add_argument("--out", default=None, help="output directory for CSV, report, traces")
        cmd.add_argument("--trace", action="store_true", help="write per-cell trace files")
        cmd.add_argument("--jobs", type=int, default=1, help="cells to run in parallel")

    run = sub.add_parser("run", help="run every cell of one scenario")
    run.add_argument("scenario")
    common(run)
    cmp = sub.add_parser("compare", help="run several scenarios into one table")
    cmp.add_argument("scenarios", nargs="+")
    common(cmp)
    val = sub.add_parser("validate", help="check a scenario without running it")
    val.add_argument("scenario")
    val.add_argument("--seed", type=int, default=None)
    return p


def _check_feasible(scenarios: list[Scenario]) -> None:
    problems = []
    for s in scenarios:
        for variant, approach in s.cells():
            problem = cell_problem(s, variant, approach)
            if problem is None:
                return
            problems.append(f"{s.name} {variant.value}/{approach.value}: {problem}")
    raise ValidationError("no feasible (variant, approach) cell:\n  " + "\n  ".join(problems))


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="meshran: %(message)s")
    args = _parser().parse_args(argv)
    try:
        refs = args.scenarios if args.command == "compare" else [args.scenario]
        scenarios = [load_scenario(ref, seed=args.seed) for ref in refs]
        _check_feasible(scenarios)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.command == "validate":
        s = scenarios[0]
        print(f"{s.name}: ok ({len(s.topology.nodes)} nodes, {len(s.topology.links)} links, "
              f"{len(s.cells())} cells, seed {s.seed})")
        for variant, approach in s.cells():
            problem = cell_problem(s, variant, approach)
            if problem:
                print(f"  {variant.value}/{approach.value}: infeasible, {problem}")
        return EXIT_OK

    if args.jobs < 1:
        print("validation error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    trace = True if args.trace else None
    try:
        report = compare_matrix(scenarios, jobs=args.jobs, trace=trace)
        out = args.out or (scenarios[0].out_dir if len(scenarios) == 1 else None)
        if out is not None:
            traces = args.trace or (len(scenarios) == 1 and scenarios[0].trace)
            for path in report.write(out, traces=traces):
                log.info("wrote %s", path)
    except Exception as exc:  # noqa: BLE001 - any crash maps to the runtime exit code
        log.error("runtime error: %s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME
    sys.stdout.write(report.table())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

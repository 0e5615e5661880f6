"""Command line pipeline: validate, build, solve and inspect scenarios.

Exit codes: 0 success, 1 infeasible/unbounded/solver failure, 2 input error.
Every failure prints exactly one ``error: ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import EsmgenError, IoFailure, NumericalError, ParseError, ValidationFailed
from .graph import NodeKind
from .lpfile import export_lp
from .model import build_model
from .results import extract_results, node_view, to_csv
from .scenario import parse_scenario
from .solver import GAP_TOL, MAX_NODES, Status, solve_milp

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2


class _Fail(Exception):
    def __init__(self, code, message):
        self.code = code
        super().__init__(message)


def _load(path):
    try:
        return parse_scenario(path)
    except (ParseError, ValidationFailed) as exc:
        raise _Fail(EXIT_INPUT, str(exc)) from exc


def cmd_validate(args):
    _load(args.scenario)
    print("OK")
    return EXIT_OK


def cmd_build(args):
    model = build_model(_load(args.scenario))
    try:
        export_lp(model, args.lp)
    except IoFailure as exc:
        raise _Fail(EXIT_INPUT, str(exc)) from exc
    print(f"wrote {args.lp}: {len(model.variables)} variables, {len(model.constraints)} rows")
    return EXIT_OK


def _write_meta(out: Path, status, objective):
    lines = [f"status={status}"]
    if objective is not None:
        lines.append(f"objective={objective:.6f}")
    (out / "meta.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_solve(args):
    system = _load(args.scenario)
    model = build_model(system)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _Fail(EXIT_INPUT, f"cannot create {out}: {exc.strerror}") from exc
    try:
        solution = solve_milp(model, gap=args.tol, max_nodes=args.max_nodes)
    except NumericalError as exc:
        raise _Fail(EXIT_INFEASIBLE, f"numerical trouble: {exc}") from exc
    if solution.status is not Status.OPTIMAL:
        _write_meta(out, solution.status.value, None)
        raise _Fail(EXIT_INFEASIBLE, solution.status.value)
    results = extract_results(model, solution)
    _write_meta(out, solution.status.value, solution.objective_value)
    to_csv(results, out / "flows.csv")
    nodes_dir = out / "nodes"
    nodes_dir.mkdir(exist_ok=True)
    for node in system.nodes:
        to_csv(node_view(results, node.label), nodes_dir / f"{node.label}.csv")
    buses = sum(1 for n in system.nodes if n.kind is NodeKind.BUS)
    print(f"optimal objective {solution.objective_value:.6f}; results for {buses} buses in {out}")
    return EXIT_OK


def cmd_results(args):
    path = Path(args.dir) / "nodes" / f"{args.node}.csv"
    if not path.is_file():
        raise _Fail(EXIT_INPUT, f"no results for node {args.node!r} in {args.dir}")
    sys.stdout.write(path.read_text(encoding="utf-8").replace("\r\n", "\n"))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def make_parser():
    parser = _Parser(prog="esmgen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("build", help="write the model as a CPLEX LP file")
    p.add_argument("scenario")
    p.add_argument("--lp", required=True, help="output LP file")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("solve", help="solve with the embedded solver and write results")
    p.add_argument("scenario")
    p.add_argument("--out", required=True, help="result directory")
    p.add_argument("--tol", type=float, default=GAP_TOL, help="absolute optimality gap")
    p.add_argument("--max-nodes", type=int, default=MAX_NODES, help="branch-and-bound node limit")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("results", help="print the per-step table of one node")
    p.add_argument("dir")
    p.add_argument("--node", required=True)
    p.set_defaults(func=cmd_results)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except EsmgenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

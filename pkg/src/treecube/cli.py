"""Command line front end: one-shot operations on XML cubes, plus the server.

Exit codes: 0 success, 1 usage problems, 2 input parsing or validation
failures, 3 operation errors, 4 reference-check mismatches.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .algebra import OperatorError
from .model import CubeValidationError, HierarchySet, ModelError, TreeCube
from .ops import (
    OpRequest,
    OpResult,
    OpsError,
    UsageError,
    apply,
    lattice_cells,
    planned_cube_rollups,
)
from .oracle import (
    MODE_FOR_OP,
    CompareReport,
    FactTable,
    FactTuple,
    compare,
    flatten,
    hierarchy_mappings,
    oracle_apply,
    oracle_cube,
)
from .xmlio import XmlFormatError, parse_facts, parse_hierarchy, serialize

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_OPERATOR = 3
EXIT_ORACLE = 4


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of exiting with code 2."""

    def error(self, message: str):  # noqa: A003 - argparse API
        raise UsageError(message)


def build_parser() -> _Parser:
    p = _Parser(
        prog="treecube",
        description="Apply OLAP operations to XML fact collections.",
    )
    p.add_argument("--facts", metavar="PATH", help="fact collection XML file")
    p.add_argument("--op", metavar="NAME", help="operation name")
    p.add_argument(
        "--hierarchy",
        metavar="PATH",
        action="append",
        default=[],
        help="dimension hierarchy XML file (repeatable)",
    )
    p.add_argument("--dimension", metavar="D")
    p.add_argument("--level", metavar="LEVEL")
    p.add_argument("--agg", metavar="F", help="sum, count, avg, min, or max")
    p.add_argument("--perm", metavar="A,B,C", help="dimension order for rotate")
    p.add_argument(
        "--member",
        metavar="M",
        action="append",
        default=[],
        help="member value (repeatable)",
    )
    p.add_argument(
        "--where",
        metavar="D=V",
        action="append",
        default=[],
        help="dimension=member constraint (repeatable)",
    )
    p.add_argument(
        "--base",
        metavar="PATH",
        help="finest-granularity fact file, required to drill down",
    )
    p.add_argument("--out", metavar="PATH", help="write the result here instead of stdout")
    p.add_argument(
        "--oracle-check",
        action="store_true",
        help="recompute relationally and fail on any difference",
    )
    return p


def build_serve_parser() -> _Parser:
    p = _Parser(prog="treecube serve", description="Run the HTTP session service.")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument(
        "--persist-dir",
        metavar="DIR",
        help="directory for session snapshots; sessions reload on restart",
    )
    return p


def _request_from_args(args: argparse.Namespace) -> OpRequest:
    if not args.op:
        raise UsageError("--op is required")
    payload: dict = {"op": args.op}
    if args.dimension:
        payload["dimension"] = args.dimension
    if args.level:
        payload["level"] = args.level
    if args.agg:
        payload["agg"] = args.agg
    if args.perm:
        payload["perm"] = [p.strip() for p in args.perm.split(",") if p.strip()]
    if args.member:
        payload["members"] = list(args.member)
    if args.where:
        where: dict[str, list[str]] = {}
        for item in args.where:
            d, sep, v = item.partition("=")
            if not sep or not d:
                raise UsageError(f"--where expects D=V, got {item!r}")
            where.setdefault(d, []).append(v)
        payload["where"] = where
    request = OpRequest.from_dict(payload)
    if request.op == "slice" and request.dimension is None and request.where:
        # accept the constraint spelling when it names a single dimension
        dims = {d for d, _ in request.where}
        if len(dims) != 1:
            raise UsageError(
                "slice via --where needs exactly one dimension; use dice for more"
            )
        (dim,) = dims
        request = OpRequest(
            op="slice",
            dimension=dim,
            members=tuple(m for _, m in request.where),
        )
    return request


def _load_hierarchies(paths: Sequence[str]) -> HierarchySet:
    hs = HierarchySet()
    for path in paths:
        hs = hs.add(parse_hierarchy(Path(path).read_text(encoding="utf-8")))
    return hs


def _load_cube(path: str, hierarchies: HierarchySet) -> TreeCube:
    cube = parse_facts(Path(path).read_text(encoding="utf-8"))
    return cube.with_hierarchies(hierarchies)


def _oracle_check(
    cube: TreeCube,
    base: Optional[TreeCube],
    req: OpRequest,
    result: OpResult,
) -> list[str]:
    """Recompute the request relationally; report any differences."""
    table = flatten(cube)
    if req.op == "cube":
        rollups = [
            (d, level, hierarchy_mappings(h))
            for d, level, h in planned_cube_rollups(cube)
        ]
        reference = oracle_cube(table, req.agg or "", rollups=rollups)
        engine = dict(lattice_cells(result.document))
        if set(engine) != set(reference):
            return [
                f"cuboid labels differ: {sorted(map(str, engine))} "
                f"vs {sorted(map(str, reference))}"
            ]
        diffs: list[str] = []
        dims = next(iter(reference.values())).dimensions
        for label, expected in reference.items():
            got = FactTable(
                dims,
                table.measure,
                tuple(FactTuple(c.coordinates, c.value) for c in engine[label]),
            )
            rep = compare(got, expected, "multiset")
            if not rep.ok:
                diffs.append(f"cuboid {label or '(apex)'}: {rep}")
        return diffs

    kwargs: dict = dict(
        dimension=req.dimension,
        level=req.level,
        agg=req.agg,
        perm=req.perm,
        members=req.members,
        where=req.where_sets(),
    )
    if req.op in ("rollup", "drilldown"):
        dim = req.dimension
        assert dim is not None
        h = cube.hierarchies.for_dimension(cube.schema.base_of(dim))
        kwargs["mappings"] = hierarchy_mappings(h)
    if req.op == "drilldown":
        assert base is not None
        kwargs["base"] = flatten(base)
    expected = oracle_apply(table, req.op, **kwargs)
    rep: CompareReport = compare(
        flatten(result.cube), expected, MODE_FOR_OP[req.op]
    )
    return list(rep.differences)


def _run(argv: Sequence[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.facts:
            raise UsageError("--facts is required")
        req = _request_from_args(args)
        if req.op in ("rollup", "drilldown") and not args.hierarchy:
            raise UsageError(f"--op {req.op} requires --hierarchy")
        if req.op == "drilldown" and not args.base:
            raise UsageError("--op drilldown requires --base")
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        hierarchies = _load_hierarchies(args.hierarchy)
        cube = _load_cube(args.facts, hierarchies)
        base = _load_cube(args.base, hierarchies) if args.base else None
    except (XmlFormatError, CubeValidationError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        result = apply(cube, req, base_cube=base)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, OperatorError, OpsError) as e:
        print(f"operation error: {e}", file=sys.stderr)
        return EXIT_OPERATOR

    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)

    payload = result.document if result.document is not None else result.cube
    text = serialize(payload)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)

    if args.oracle_check:
        diffs = _oracle_check(cube, base, req, result)
        if diffs:
            for d in diffs:
                print(f"oracle mismatch: {d}", file=sys.stderr)
            return EXIT_ORACLE
        print("oracle check passed", file=sys.stderr)
    return EXIT_OK


def _serve(argv: Sequence[str]) -> int:
    parser = build_serve_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    import uvicorn

    from .service import create_app

    app = create_app(persist_dir=args.persist_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "serve":
        return _serve(argv[1:])
    return _run(argv)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

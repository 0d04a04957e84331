"""The nine cube operations, each a fixed composition of the tree operators.

Every operation here works cube-in/cube-out (the cube lattice builder also
returns a report document) and touches tree data only through the
collection operators in algebra — a property the test suite asserts via
the recorded operator trace on each result.

Compositions:
  rotate      select
  switch      reorder
  push        copy_paste
  pull        project
  slice       select, product
  dice        select, product
  roll_up     select, group, join, aggregate, delete_nodes, insert_nodes
  drill_down  select, join, join, project, aggregate, product
  cube_lattice   the roll_up pipeline per hierarchical dimension, then
                 group/aggregate/delete_nodes/insert_nodes and a product
                 per dimension subset, and a final product over cuboids
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

from .algebra import (
    AggFunction,
    AppendAggregate,
    AttachCopyUnder,
    InsertNode,
    JoinSpec,
    MoveNode,
    OperatorError,
    OrderKey,
    ProjectionList,
    Report,
    aggregate,
    copy_paste,
    delete_nodes,
    group,
    insert_nodes,
    join,
    product,
    project,
    reorder,
    select,
    trace_capture,
)
from .model import (
    CubeCellView,
    CubeSchema,
    HierarchyTree,
    ModelError,
    TreeCube,
)
from .pattern import PatternBuilder, PatternTree, ValueEquals, ValueIn, ValuePred
from .tree import DataTree, TreeCollection


class OpsError(ValueError):
    """Raised when an operation's parameters don't fit the cube."""


class UsageError(ValueError):
    """Raised when a request is missing or misusing parameters."""


ALL_MARKER = "ALL"
CUBE_ROOT_TAG = "cube"
CUBOID_TAG = "cuboid"
CUBOID_LABEL_TAG = "dims"


@dataclass
class OpResult:
    """Outcome of one operation: the new cube state, plus diagnostics.

    document is set only by the cube-lattice operation, whose result is a
    report tree rather than a new cube state; its cube echoes the input.
    trace lists the collection operators invoked, in order.
    """

    cube: TreeCube
    warnings: list[str] = field(default_factory=list)
    trace: list[str] = field(default_factory=list)
    document: Optional[DataTree] = None


# --- pattern helpers --------------------------------------------------------------

def _flat_fact_pattern(
    schema: CubeSchema,
    *,
    child_order: Optional[Sequence[str]] = None,
    preds: Optional[Mapping[str, ValuePred]] = None,
    keep_root: bool = False,
) -> tuple[PatternTree, int, dict[str, int]]:
    """A pattern over one flat fact: the root plus one child pid per tag."""
    pb = PatternBuilder()
    root = pb.add(schema.fact_tag, keep=keep_root)
    if child_order is None:
        child_order = list(schema.dimensions)
        if schema.measure is not None:
            child_order.append(schema.measure)
    preds = preds or {}
    pids = {tag: pb.add(tag, parent=root, value=preds.get(tag)) for tag in child_order}
    return pb.build(), root, pids


def _require_dimension(schema: CubeSchema, dimension: str) -> None:
    if dimension not in schema.dimensions:
        raise OpsError(
            f"unknown dimension {dimension!r}; cube has {list(schema.dimensions)}"
        )


def _require_measure(schema: CubeSchema, op: str) -> str:
    if schema.measure is None:
        raise OpsError(f"{op} needs a measure, but this cube has none")
    return schema.measure


def _leaf_value(tree: DataTree, tag: str) -> Optional[str]:
    for kid in tree.children(tree.root):
        if tree.tag(kid) == tag:
            return tree.value(kid)
    return None


# --- dimension reordering ----------------------------------------------------------

def rotate(cube: TreeCube, order: Sequence[str]) -> OpResult:
    """Permute the dimension reading order of every fact."""
    try:
        schema2 = cube.schema.with_dimensions(tuple(order))
    except ModelError as e:
        raise OpsError(str(e)) from None
    report = Report()
    with trace_capture() as trace:
        child_order = list(order)
        if cube.schema.measure is not None:
            child_order.append(cube.schema.measure)
        pattern, root, _ = _flat_fact_pattern(cube.schema, child_order=child_order)
        out = select(cube.fact_collection(), pattern, frozenset({root}), report)
    return OpResult(cube.with_data(out, schema2), report.warnings, list(trace))


def _run_reversal_ranks(seq: Sequence[str]) -> tuple[int, ...]:
    """Target slots that reverse the order of maximal equal-value runs.

    Applying the permutation twice restores the original order: the
    reversed run list is itself a maximal run decomposition (adjacent runs
    still differ), so the second reversal undoes the first.
    """
    runs: list[list[int]] = []
    for i, v in enumerate(seq):
        if runs and seq[runs[-1][-1]] == v:
            runs[-1].append(i)
        else:
            runs.append([i])
    ranks = [0] * len(seq)
    slot = 0
    for run in reversed(runs):
        for occ in run:
            ranks[occ] = slot
            slot += 1
    return tuple(ranks)


def switch(cube: TreeCube, dimension: str, a: str, b: str) -> OpResult:
    """Exchange the positions of two members' fact runs along one dimension."""
    _require_dimension(cube.schema, dimension)
    facts = cube.fact_collection()
    members = {a, b}
    seq = [
        v
        for t in facts
        if (v := _leaf_value(t, dimension)) is not None and v in members
    ]
    ranks = _run_reversal_ranks(seq)
    report = Report()
    with trace_capture() as trace:
        pb = PatternBuilder()
        root = pb.add(cube.schema.fact_tag)
        pb.add(dimension, parent=root, value=ValueIn(frozenset(members)))
        pattern = pb.build()
        out = reorder(
            facts,
            pattern,
            [OrderKey(pid=root, kind="positional", ranks=ranks)],
            frozenset({root}),
            report,
        )
    return OpResult(cube.with_data(out), report.warnings, list(trace))


# --- measure/member moves ----------------------------------------------------------

def push(cube: TreeCube, dimension: str) -> OpResult:
    """Copy each fact's member of one dimension under its measure leaf."""
    _require_dimension(cube.schema, dimension)
    measure = _require_measure(cube.schema, "push")
    schema2 = cube.schema.with_pushed(dimension)
    report = Report()
    with trace_capture() as trace:
        pattern, _, pids = _flat_fact_pattern(
            cube.schema, child_order=[dimension, measure]
        )
        out = copy_paste(
            cube.fact_collection(),
            pattern,
            [pids[dimension]],
            [AttachCopyUnder(pids[measure])],
            report,
        )
    return OpResult(cube.with_data(out, schema2), report.warnings, list(trace))


def pull(cube: TreeCube) -> OpResult:
    """Promote the measure to the leading position, making it a dimension."""
    measure = _require_measure(cube.schema, "pull")
    schema2 = cube.schema.with_pulled()
    report = Report()
    with trace_capture() as trace:
        pattern, root, pids = _flat_fact_pattern(cube.schema)
        retained = (root, pids[measure]) + tuple(
            pids[d] for d in cube.schema.dimensions
        )
        out = project(
            cube.fact_collection(), pattern, ProjectionList(retained), report
        )
    return OpResult(cube.with_data(out, schema2), report.warnings, list(trace))


# --- subset extraction --------------------------------------------------------------

def slice_cube(cube: TreeCube, dimension: str, members: Sequence[str]) -> OpResult:
    """Facts whose member of one dimension is among the given values, re-rooted."""
    _require_dimension(cube.schema, dimension)
    if not members:
        raise UsageError("slice needs at least one member value")
    pred: ValuePred = (
        ValueEquals(members[0])
        if len(members) == 1
        else ValueIn(frozenset(members))
    )
    report = Report()
    with trace_capture() as trace:
        pb = PatternBuilder()
        root = pb.add(cube.schema.fact_tag)
        pb.add(dimension, parent=root, value=pred)
        pattern = pb.build()
        selected = select(cube.fact_collection(), pattern, frozenset({root}), report)
        if len(selected) == 0:
            report.warn("slice: no facts matched")
        out = product(selected, cube.schema.collection_tag)
    return OpResult(cube.with_data(out), report.warnings, list(trace))


def dice(cube: TreeCube, constraints: Mapping[str, Sequence[str]]) -> OpResult:
    """Facts satisfying every per-dimension member-set constraint, re-rooted."""
    if not constraints:
        raise UsageError("dice needs at least one dimension constraint")
    for d in constraints:
        _require_dimension(cube.schema, d)
    report = Report()
    with trace_capture() as trace:
        pb = PatternBuilder()
        root = pb.add(cube.schema.fact_tag)
        for d in cube.schema.dimensions:
            if d in constraints:
                pb.add(d, parent=root, value=ValueIn(frozenset(constraints[d])))
        pattern = pb.build()
        selected = select(cube.fact_collection(), pattern, frozenset({root}), report)
        if len(selected) == 0:
            report.warn("dice: no facts matched")
        out = product(selected, cube.schema.collection_tag)
    return OpResult(cube.with_data(out), report.warnings, list(trace))


# --- granularity changes -------------------------------------------------------------

def _check_agg(agg: str) -> None:
    """Reject unknown aggregation names before any pipeline work starts."""
    try:
        AggFunction(agg, 0)
    except OperatorError as e:
        raise OpsError(str(e)) from None


def _resolve_hierarchy(
    cube: TreeCube, dimension: str, hierarchy: Optional[HierarchyTree]
) -> HierarchyTree:
    if hierarchy is not None:
        return hierarchy
    base = cube.schema.base_of(dimension)
    try:
        return cube.hierarchies.for_dimension(base)
    except ModelError as e:
        raise OpsError(str(e)) from None


def _next_tag_after(schema: CubeSchema, dimension: str) -> Optional[str]:
    """The dimension tag that should immediately follow the rolled slot."""
    i = schema.dimensions.index(dimension)
    for d in schema.dimensions[i + 1 :]:
        return d
    return None


def _roll_up_steps(
    cube: TreeCube,
    dimension: str,
    level: str,
    agg: str,
    h: HierarchyTree,
    report: Report,
) -> TreeCube:
    """The six-operator pipeline; records onto whatever trace is active."""
    schema = cube.schema
    measure = schema.measure
    assert measure is not None
    others = [d for d in schema.dimensions if d != dimension]
    schema2 = schema.with_level(dimension, level)
    if schema.pushed:
        schema2 = CubeSchema(
            schema2.fact_tag,
            schema2.collection_tag,
            schema2.dimensions,
            schema2.measure,
            dict(schema2.level_of),
            dict(schema2.base_dimension),
            (),
        )

    # 1: separate one working copy per fact
    P_all, root_all, _ = _flat_fact_pattern(schema)
    step1 = select(cube.fact_collection(), P_all, frozenset({root_all}), report)

    # 2: group by the non-rolled dimensions, shaping groups as fact-rooted
    # trees whose leading children are the group-key member copies
    P_g, _, pids_g = _flat_fact_pattern(schema)
    step2 = group(
        step1,
        P_g,
        [pids_g[d] for d in others],
        None,
        report,
        root_tag=schema.fact_tag,
        inline_keys=True,
    )

    # 3: join each group's members with the hierarchy records, splitting the
    # group per distinct ancestor at the target level
    pb = PatternBuilder()
    l_root = pb.add(schema.fact_tag, keep=True)
    l_unit = pb.add(schema.fact_tag, parent=l_root, keep=True)
    l_link = pb.add(dimension, parent=l_unit)
    left = pb.build()
    pb = PatternBuilder()
    r_root = pb.add("records")
    r_entry = pb.add("entry", parent=r_root)
    r_link = pb.add(dimension, parent=r_entry)
    r_level = pb.add(level, parent=r_entry)
    right = pb.build()
    records = TreeCollection.of([h.record_tree()])
    step3 = join(
        step2,
        records,
        JoinSpec(left, right, ((l_link, r_link),), (r_level,), unit=l_unit),
        report,
    )

    # 4: collapse each (group key, ancestor) tree's member measures
    pb = PatternBuilder()
    a_root = pb.add(schema.fact_tag)
    a_member = pb.add(schema.fact_tag, parent=a_root)
    a_measure = pb.add(measure, parent=a_member)
    P_a = pb.build()
    step4 = aggregate(
        step3,
        P_a,
        AggFunction(agg, a_measure),
        [AppendAggregate(a_root, measure)],
        None,
        report,
    )

    # 5: drop the member subtrees
    pb = PatternBuilder()
    d_root = pb.add(schema.fact_tag)
    d_member = pb.add(schema.fact_tag, parent=d_root)
    P_d = pb.build()
    step5 = delete_nodes(step4, P_d, frozenset({d_member}), report)

    # 6: move the grafted ancestor leaf into the rolled dimension's slot
    next_tag = _next_tag_after(schema, dimension)
    pb = PatternBuilder()
    i_root = pb.add(schema.fact_tag)
    i_graft = pb.add(level, parent=i_root)
    i_target = pb.add(next_tag if next_tag is not None else measure, parent=i_root)
    P_i = pb.build()
    step6 = insert_nodes(
        step5,
        P_i,
        [InsertNode(i_target, level, MoveNode(i_graft), "before")],
        report,
    )

    return cube.with_data(step6, schema2)


def roll_up(
    cube: TreeCube,
    dimension: str,
    level: str,
    agg: str,
    hierarchy: Optional[HierarchyTree] = None,
) -> OpResult:
    """Move one dimension to a coarser level, re-aggregating the measure."""
    _require_dimension(cube.schema, dimension)
    _require_measure(cube.schema, "roll-up")
    h = _resolve_hierarchy(cube, dimension, hierarchy)
    if level not in h.levels:
        raise OpsError(f"level {level!r} not in hierarchy {h.name!r} {h.levels}")
    if dimension not in h.levels:
        raise OpsError(
            f"dimension {dimension!r} is not a level of hierarchy {h.name!r}"
        )
    if not h.is_coarser(level, dimension):
        raise OpsError(
            f"target level {level!r} is not coarser than {dimension!r}"
        )
    try:
        cube.schema.with_level(dimension, level)
    except ModelError as e:
        raise OpsError(str(e)) from None
    _check_agg(agg)
    report = Report()
    with trace_capture() as trace:
        out = _roll_up_steps(cube, dimension, level, agg, h, report)
    return OpResult(out, report.warnings, list(trace))


def drill_down(
    cube: TreeCube,
    dimension: str,
    level: str,
    agg: str,
    base_cube: TreeCube,
    hierarchy: Optional[HierarchyTree] = None,
) -> OpResult:
    """Move one dimension to a finer level, recovering values from the base cube.

    The base cube must hold the same facts at finest granularity; every
    non-drilled dimension must already be at base granularity.
    """
    schema = cube.schema
    _require_dimension(schema, dimension)
    measure = _require_measure(schema, "drill-down")
    if base_cube is None:
        raise UsageError("drill-down needs the finest-granularity base cube")
    h = _resolve_hierarchy(cube, dimension, hierarchy)
    if level not in h.levels:
        raise OpsError(f"level {level!r} not in hierarchy {h.name!r} {h.levels}")
    if dimension not in h.levels:
        raise OpsError(
            f"dimension {dimension!r} is not a level of hierarchy {h.name!r}"
        )
    if not h.is_coarser(dimension, level):
        raise OpsError(f"target level {level!r} is not finer than {dimension!r}")
    others = [d for d in schema.dimensions if d != dimension]
    for d in others:
        if schema.base_of(d) != d:
            raise OpsError(
                f"dimension {d!r} must be at base granularity to drill down"
            )
    base = h.dimension
    expected_base_dims = tuple(
        base if d == dimension else d for d in schema.dimensions
    )
    bschema = base_cube.schema
    if (
        bschema.fact_tag != schema.fact_tag
        or bschema.dimensions != expected_base_dims
        or bschema.measure != measure
    ):
        raise OpsError(
            "base cube schema mismatch: expected "
            f"{expected_base_dims} with measure {measure!r}, got "
            f"{bschema.dimensions} with measure {bschema.measure!r}"
        )
    _check_agg(agg)
    schema2 = schema.with_level(dimension, level)

    report = Report()
    with trace_capture() as trace:
        # 1: working copies
        P_all, root_all, _ = _flat_fact_pattern(schema)
        step1 = select(cube.fact_collection(), P_all, frozenset({root_all}), report)

        # 2: expand each fact by the finer members under its coarse member
        pb = PatternBuilder()
        l1_root = pb.add(schema.fact_tag, keep=True)
        l1_link = pb.add(dimension, parent=l1_root)
        left1 = pb.build()
        pb = PatternBuilder()
        r1_root = pb.add("records")
        r1_entry = pb.add("entry", parent=r1_root)
        r1_coarse = pb.add(dimension, parent=r1_entry)
        if level == base:
            r1_base = pb.add(base, parent=r1_entry)
            keep1 = (r1_base,)
        else:
            r1_level = pb.add(level, parent=r1_entry)
            r1_base = pb.add(base, parent=r1_entry)
            keep1 = (r1_level, r1_base)
        right1 = pb.build()
        records = TreeCollection.of([h.record_tree()])
        step2 = join(
            step1,
            records,
            JoinSpec(left1, right1, ((l1_link, r1_coarse),), keep1),
            report,
        )

        # 3: recover base measures by joining on the finest member + the
        # other dimensions; graft the whole matching base fact
        pb = PatternBuilder()
        l2_root = pb.add(schema.fact_tag, keep=True)
        l2_base = pb.add(base, parent=l2_root)
        l2_others = {d: pb.add(d, parent=l2_root) for d in others}
        left2 = pb.build()
        pb = PatternBuilder()
        r2_root = pb.add(schema.fact_tag)
        r2_base = pb.add(base, parent=r2_root)
        r2_others = {d: pb.add(d, parent=r2_root) for d in others}
        right2 = pb.build()
        links2 = ((l2_base, r2_base),) + tuple(
            (l2_others[d], r2_others[d]) for d in others
        )
        step3 = join(
            step2,
            base_cube.fact_collection(),
            JoinSpec(left2, right2, links2, (r2_root,)),
            report,
        )

        # 4: project to flat facts at the target level, masking the coarse
        # member and the stale aggregate
        pb = PatternBuilder()
        p_root = pb.add(schema.fact_tag)
        p_children: dict[str, int] = {}
        for d in schema2.dimensions:
            p_children[d] = pb.add(d, parent=p_root)
        p_nested = pb.add(schema.fact_tag, parent=p_root)
        p_value = pb.add(measure, parent=p_nested)
        P_p = pb.build()
        retained = (
            (p_root,)
            + tuple(p_children[d] for d in schema2.dimensions)
            + (p_value,)
        )
        step4 = project(step3, P_p, ProjectionList(retained), report)

        # 5: merge duplicate cells at the target key
        P_a, a_root, a_pids = _flat_fact_pattern(schema2)
        step5 = aggregate(
            step4,
            P_a,
            AggFunction(agg, a_pids[measure]),
            [AppendAggregate(a_root, measure)],
            [a_pids[d] for d in schema2.dimensions],
            report,
        )

        # 6: one rooted result document
        out = product(step5, schema.collection_tag)
    return OpResult(
        cube.with_data(out, schema2), report.warnings, list(trace)
    )


# --- the cube lattice ----------------------------------------------------------------

def planned_cube_rollups(
    cube: TreeCube,
) -> list[tuple[str, str, HierarchyTree]]:
    """The (dimension, coarsest level, hierarchy) moves a cube pass makes first."""
    plan = []
    for d in cube.schema.dimensions:
        h = cube.hierarchies.get(cube.schema.base_of(d))
        if h is None:
            continue
        coarsest = h.levels[0]
        if d == coarsest or d not in h.levels or not h.is_coarser(coarsest, d):
            continue
        plan.append((d, coarsest, h))
    return plan


def cube_lattice(cube: TreeCube, agg: str) -> OpResult:
    """Aggregate every dimension subset after rolling to the coarsest levels.

    The result is a report document — a "cube" root holding one "cuboid"
    per dimension subset (coarsest granularity), each with a leading "dims"
    label leaf naming its retained dimensions (absent on the apex cuboid)
    and facts whose masked dimensions carry the ALL marker.  The session
    cube itself is unchanged.
    """
    measure = _require_measure(cube.schema, "cube")
    _check_agg(agg)
    report = Report()
    with trace_capture() as trace:
        work = cube
        for d, coarsest, h in planned_cube_rollups(cube):
            work = _roll_up_steps(work, d, coarsest, agg, h, report)
        schema = work.schema
        dims = schema.dimensions
        facts = work.fact_collection()

        cuboids: list[DataTree] = []
        for r in range(len(dims), -1, -1):
            for subset in itertools.combinations(range(len(dims)), r):
                kept = [dims[i] for i in subset]
                masked = [d for d in dims if d not in kept]

                P_g, _, pids_g = _flat_fact_pattern(schema)
                grouped = group(
                    facts,
                    P_g,
                    [pids_g[d] for d in kept],
                    None,
                    report,
                    root_tag=schema.fact_tag,
                    inline_keys=True,
                )

                pb = PatternBuilder()
                a_root = pb.add(schema.fact_tag)
                a_member = pb.add(schema.fact_tag, parent=a_root)
                a_measure = pb.add(measure, parent=a_member)
                aggregated = aggregate(
                    grouped,
                    pb.build(),
                    AggFunction(agg, a_measure),
                    [AppendAggregate(a_root, measure)],
                    None,
                    report,
                )

                pb = PatternBuilder()
                d_root = pb.add(schema.fact_tag)
                d_member = pb.add(schema.fact_tag, parent=d_root)
                cells = delete_nodes(
                    aggregated, pb.build(), frozenset({d_member}), report
                )

                if masked:
                    pb = PatternBuilder()
                    i_root = pb.add(schema.fact_tag)
                    targets: dict[str, int] = {}
                    for d in kept:
                        targets[d] = pb.add(d, parent=i_root)
                    targets[measure] = pb.add(measure, parent=i_root)
                    inserts = []
                    for d in masked:
                        i = dims.index(d)
                        after = next(
                            (x for x in dims[i + 1 :] if x in targets), measure
                        )
                        inserts.append(
                            InsertNode(targets[after], d, ALL_MARKER, "before")
                        )
                    cells = insert_nodes(cells, pb.build(), inserts, report)

                cuboid = product(cells, CUBOID_TAG)
                if kept:
                    pb = PatternBuilder()
                    c_root = pb.add(CUBOID_TAG)
                    cuboid = insert_nodes(
                        cuboid,
                        pb.build(),
                        [
                            InsertNode(
                                c_root,
                                CUBOID_LABEL_TAG,
                                ",".join(kept),
                                "first-child",
                            )
                        ],
                        report,
                    )
                cuboids.append(cuboid[0])

        lattice = product(TreeCollection.of(cuboids), CUBE_ROOT_TAG)
    return OpResult(cube, report.warnings, list(trace), document=lattice[0])


def lattice_cells(
    document: DataTree,
) -> list[tuple[Optional[str], list[CubeCellView]]]:
    """Read a cube report back as (label, cells) per cuboid.

    The label is the comma-joined kept-dimension list, or None for the
    apex cuboid; masked coordinates keep their ALL markers.  Within each
    fact the last leaf is taken as the measure, the rest as coordinates.
    """
    out: list[tuple[Optional[str], list[CubeCellView]]] = []
    for cuboid in document.children(document.root):
        kids = list(document.children(cuboid))
        label: Optional[str] = None
        if (
            kids
            and document.tag(kids[0]) == CUBOID_LABEL_TAG
            and document.is_leaf(kids[0])
        ):
            label = document.value(kids[0]) or ""
            kids = kids[1:]
        cells = []
        for fact in kids:
            leaves = list(document.children(fact))
            coords = {
                document.tag(k): document.value(k) or "" for k in leaves[:-1]
            }
            value = document.value(leaves[-1]) if leaves else None
            cells.append(CubeCellView(coords, value))
        out.append((label, cells))
    return out


# --- requests -----------------------------------------------------------------------

OP_NAMES = (
    "rotate",
    "switch",
    "push",
    "pull",
    "slice",
    "dice",
    "rollup",
    "drilldown",
    "cube",
)


def _normalize_op(name: str) -> str:
    key = name.strip().lower().replace("-", "").replace("_", "")
    for op in OP_NAMES:
        if key == op:
            return op
    raise UsageError(f"unknown operation {name!r}; known: {', '.join(OP_NAMES)}")


@dataclass(frozen=True)
class OpRequest:
    """One operation request — the shared encoding for CLI flags and the wire.

    members carries slice members or the switch pair; where carries dice
    constraints as (dimension, member) pairs, one per listed member.
    """

    op: str
    dimension: Optional[str] = None
    level: Optional[str] = None
    agg: Optional[str] = None
    perm: tuple[str, ...] = ()
    members: tuple[str, ...] = ()
    where: tuple[tuple[str, str], ...] = ()

    def where_sets(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for d, v in self.where:
            out.setdefault(d, []).append(v)
        return out

    def to_dict(self) -> dict:
        body: dict = {"op": self.op}
        if self.dimension is not None:
            body["dimension"] = self.dimension
        if self.level is not None:
            body["level"] = self.level
        if self.agg is not None:
            body["agg"] = self.agg
        if self.perm:
            body["perm"] = list(self.perm)
        if self.members:
            body["members"] = list(self.members)
        if self.where:
            sets = self.where_sets()
            body["where"] = {d: list(vs) for d, vs in sets.items()}
        return body

    @staticmethod
    def from_dict(body: Mapping) -> "OpRequest":
        if "op" not in body or not isinstance(body["op"], str):
            raise UsageError("request needs an 'op' name")
        op = _normalize_op(body["op"])
        known = {"op", "dimension", "level", "agg", "perm", "members", "where"}
        unknown = set(body) - known
        if unknown:
            raise UsageError(f"unknown request fields: {sorted(unknown)}")

        def opt_str(key: str) -> Optional[str]:
            v = body.get(key)
            if v is None:
                return None
            if not isinstance(v, str):
                raise UsageError(f"{key} must be a string")
            return v

        def str_list(key: str) -> tuple[str, ...]:
            v = body.get(key)
            if v is None:
                return ()
            if isinstance(v, str):
                raise UsageError(f"{key} must be a list of strings")
            items = list(v)
            if not all(isinstance(x, str) for x in items):
                raise UsageError(f"{key} must be a list of strings")
            return tuple(items)

        where_raw = body.get("where")
        where: tuple[tuple[str, str], ...] = ()
        if where_raw is not None:
            if isinstance(where_raw, Mapping):
                pairs = []
                for d, vs in where_raw.items():
                    if isinstance(vs, str):
                        raise UsageError(
                            "where values must be lists of member strings"
                        )
                    for v in vs:
                        if not isinstance(v, str):
                            raise UsageError(
                                "where values must be lists of member strings"
                            )
                        pairs.append((str(d), v))
                where = tuple(pairs)
            else:
                raise UsageError("where must map dimensions to member lists")
        return OpRequest(
            op=op,
            dimension=opt_str("dimension"),
            level=opt_str("level"),
            agg=opt_str("agg"),
            perm=str_list("perm"),
            members=str_list("members"),
            where=where,
        )


def apply(
    cube: TreeCube,
    request: OpRequest,
    base_cube: Optional[TreeCube] = None,
) -> OpResult:
    """Dispatch one request against a cube; base_cube feeds drill-down."""
    op = _normalize_op(request.op)

    def need(value, flag: str):
        if value is None or value == () or value == "":
            raise UsageError(f"{op} needs {flag}")
        return value

    if op == "rotate":
        return rotate(cube, need(request.perm, "a dimension permutation"))
    if op == "switch":
        need(request.dimension, "a dimension")
        if len(request.members) != 2:
            raise UsageError("switch needs exactly two member values")
        a, b = request.members
        return switch(cube, request.dimension, a, b)
    if op == "push":
        return push(cube, need(request.dimension, "a dimension"))
    if op == "pull":
        return pull(cube)
    if op == "slice":
        return slice_cube(
            cube,
            need(request.dimension, "a dimension"),
            list(need(request.members, "at least one member")),
        )
    if op == "dice":
        return dice(cube, need(request.where_sets(), "at least one constraint"))
    if op == "rollup":
        return roll_up(
            cube,
            need(request.dimension, "a dimension"),
            need(request.level, "a target level"),
            need(request.agg, "an aggregation function"),
        )
    if op == "drilldown":
        if base_cube is None:
            raise UsageError("drilldown needs the base cube")
        return drill_down(
            cube,
            need(request.dimension, "a dimension"),
            need(request.level, "a target level"),
            need(request.agg, "an aggregation function"),
            base_cube,
        )
    if op == "cube":
        return cube_lattice(cube, need(request.agg, "an aggregation function"))
    raise UsageError(f"unknown operation {op!r}")

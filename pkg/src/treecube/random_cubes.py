"""Seeded random cubes and operation parameters for equivalence sweeps.

Everything is driven by a single ``random.Random(seed)`` so any failure can
be replayed from the printed seed.  Sizes stay within the sweep envelope:
at most four dimensions, eight members per dimension, two hundred facts,
and two-level hierarchies.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .model import (
    CubeCellView,
    CubeSchema,
    HierarchySet,
    HierarchyTree,
    LevelMember,
    TreeCube,
    from_cells,
)
from .oracle import FactTable, FactTuple, hierarchy_mappings
from .ops import OpRequest
from .tree import build_tree

_DIM_POOL = ("city", "product", "year", "channel")
_MEASURE = "amount"


@dataclass
class RandomCube:
    """One generated cube, its relational mirror, and its hierarchies."""

    seed: int
    cube: TreeCube
    table: FactTable
    hierarchies: HierarchySet
    mappings: dict[str, dict[str, dict[str, str]]]
    # mappings[dimension][level][member] -> ancestor value

    def coarse_level(self, dimension: str) -> str:
        h = self.hierarchies.get(dimension)
        assert h is not None
        return h.levels[0]


def _measure_text(rng: random.Random) -> str:
    if rng.random() < 0.25:
        return f"{rng.randint(0, 999)}.{rng.randint(1, 9)}"
    return str(rng.randint(0, 999))


def _build_hierarchy(
    rng: random.Random, dimension: str, members: list[str]
) -> HierarchyTree:
    coarse = f"{dimension}_group"
    group_count = rng.randint(1, min(3, len(members)))
    groups = [f"{dimension[:2]}g{i + 1}" for i in range(group_count)]
    parent = {m: rng.choice(groups) for m in members}
    paths = {
        m: (LevelMember(coarse, parent[m]), LevelMember(dimension, m))
        for m in members
    }
    kids_of: dict[str, list[str]] = {g: [] for g in groups}
    for m in members:
        kids_of[parent[m]].append(m)
    tree = build_tree(
        (
            f"{dimension}_levels",
            None,
            [
                (coarse, g, [(dimension, m, []) for m in kids_of[g]])
                for g in groups
                if kids_of[g]
            ],
        )
    )
    return HierarchyTree(
        name=f"{dimension}_levels",
        dimension=dimension,
        levels=(coarse, dimension),
        paths=paths,
        tree=tree,
    )


def make_cube(seed: int, *, max_facts: int = 200) -> RandomCube:
    rng = random.Random(seed)
    dim_count = rng.randint(1, 4)
    dims = _DIM_POOL[:dim_count]
    members = {
        d: [f"{d[:2]}{i + 1}" for i in range(rng.randint(1, 8))] for d in dims
    }

    hierarchies = HierarchySet()
    mappings: dict[str, dict[str, dict[str, str]]] = {}
    for d in dims:
        h = _build_hierarchy(rng, d, members[d])
        hierarchies = hierarchies.add(h)
        mappings[d] = hierarchy_mappings(h)

    fact_count = rng.randint(1, max_facts)
    rows = []
    for _ in range(fact_count):
        coords = {d: rng.choice(members[d]) for d in dims}
        rows.append(FactTuple(coords, _measure_text(rng)))

    schema = CubeSchema(
        fact_tag="sale",
        collection_tag="sales",
        dimensions=dims,
        measure=_MEASURE,
    )
    cube = from_cells(
        schema,
        [CubeCellView(r.coordinates, r.measure) for r in rows],
        hierarchies=hierarchies,
    )
    table = FactTable(dims, _MEASURE, tuple(rows))
    return RandomCube(seed, cube, table, hierarchies, mappings)


def random_request(rc: RandomCube, op: str, rng: random.Random) -> OpRequest:
    """Valid-by-construction parameters for one operation on this cube."""
    dims = rc.cube.schema.dimensions
    members_of = lambda d: sorted({r.coordinates[d] for r in rc.table.rows})

    if op == "rotate":
        perm = list(dims)
        rng.shuffle(perm)
        return OpRequest(op="rotate", perm=tuple(perm))
    if op == "switch":
        d = rng.choice(dims)
        pool = members_of(d) or [f"{d[:2]}1"]
        a = rng.choice(pool)
        b = rng.choice(pool + [f"{d[:2]}_absent"])
        return OpRequest(op="switch", dimension=d, members=(a, b))
    if op == "push":
        return OpRequest(op="push", dimension=rng.choice(dims))
    if op == "pull":
        return OpRequest(op="pull")
    if op == "slice":
        d = rng.choice(dims)
        pool = members_of(d) or [f"{d[:2]}1"]
        picked = rng.sample(pool, k=min(len(pool), rng.randint(1, 3)))
        if rng.random() < 0.3:
            picked.append(f"{d[:2]}_absent")
        return OpRequest(op="slice", dimension=d, members=tuple(picked))
    if op == "dice":
        chosen = rng.sample(dims, k=rng.randint(1, len(dims)))
        where = []
        for d in sorted(chosen, key=dims.index):
            pool = members_of(d) or [f"{d[:2]}1"]
            for m in rng.sample(pool, k=min(len(pool), rng.randint(1, 2))):
                where.append((d, m))
        return OpRequest(op="dice", where=tuple(where))
    if op == "rollup":
        d = rng.choice(dims)
        return OpRequest(
            op="rollup",
            dimension=d,
            level=rc.coarse_level(d),
            agg=rng.choice(("sum", "count", "min", "max", "avg")),
        )
    if op == "cube":
        return OpRequest(op="cube", agg=rng.choice(("sum", "count")))
    raise ValueError(f"no random parameters for {op!r}")


def rollup_then_drill(rc: RandomCube, rng: random.Random) -> tuple[OpRequest, OpRequest]:
    """A matched roll-up / drill-down pair starting from the base cube."""
    d = rng.choice(rc.cube.schema.dimensions)
    agg = rng.choice(("sum", "count", "min", "max", "avg"))
    up = OpRequest(op="rollup", dimension=d, level=rc.coarse_level(d), agg=agg)
    down = OpRequest(op="drilldown", dimension=rc.coarse_level(d), level=d, agg=agg)
    return up, down

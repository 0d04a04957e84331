"""Multidimensional model over trees.

A cube is a collection of flat fact trees — one leaf per dimension in a
fixed reading order, then the measure leaf last — plus a schema naming
those positions and a set of dimension hierarchies.  This module defines
the schema, cube, and hierarchy types, cube validation with stable error
codes, and the cell view (one coordinates/value record per fact).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .algebra import parse_number
from .tree import DataTree, TreeBuilder, TreeCollection, build_tree


class ModelError(ValueError):
    """Raised on schema/hierarchy contract violations."""


def subtree_view(doc: DataTree, nid: int) -> DataTree:
    """A tree rooted at one node of doc, sharing its (immutable) nodes."""
    return DataTree(nid, {i: doc.nodes[i] for i in doc.subtree(nid)})


# --- schema ---------------------------------------------------------------------

@dataclass(frozen=True)
class CubeSchema:
    """Names and order of the parts of a fact.

    dimensions holds the current leaf tags in reading order.  After a
    granularity change the affected slot is renamed to the level tag;
    level_of then maps the original finest dimension to its current level,
    and base_dimension maps the current tag back to that finest dimension
    so its hierarchy can still be found.  measure may be None for cubes
    whose measure was promoted to a leading dimension.  pushed lists
    member tags that were copied under the measure leaf, in push order,
    which validation accepts as an extended fact shape.
    """

    fact_tag: str
    collection_tag: str
    dimensions: tuple[str, ...]
    measure: Optional[str]
    level_of: dict[str, str] = field(default_factory=dict)
    base_dimension: dict[str, str] = field(default_factory=dict)
    pushed: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.dimensions:
            raise ModelError("schema needs at least one dimension")
        names = list(self.dimensions)
        if self.measure is not None:
            names.append(self.measure)
        if len(set(names)) != len(names):
            raise ModelError(f"schema names must be unique: {names}")
        if not self.level_of:
            object.__setattr__(self, "level_of", {d: d for d in self.dimensions})
        if not self.base_dimension:
            object.__setattr__(
                self, "base_dimension", {d: d for d in self.dimensions}
            )

    def base_of(self, dimension: str) -> str:
        return self.base_dimension.get(dimension, dimension)

    def with_dimensions(self, order: Sequence[str]) -> "CubeSchema":
        if sorted(order) != sorted(self.dimensions):
            raise ModelError(
                f"not a permutation of {self.dimensions}: {tuple(order)}"
            )
        return CubeSchema(
            self.fact_tag,
            self.collection_tag,
            tuple(order),
            self.measure,
            dict(self.level_of),
            dict(self.base_dimension),
            self.pushed,
        )

    def with_level(self, dimension: str, level: str) -> "CubeSchema":
        """Rename a dimension slot to a new granularity level tag."""
        if dimension not in self.dimensions:
            raise ModelError(f"unknown dimension {dimension!r}")
        base = self.base_of(dimension)
        dims = tuple(level if d == dimension else d for d in self.dimensions)
        level_of = {k: v for k, v in self.level_of.items() if k != base}
        level_of[base] = level
        base_dimension = {
            k: v for k, v in self.base_dimension.items() if k != dimension
        }
        base_dimension[level] = base
        return CubeSchema(
            self.fact_tag,
            self.collection_tag,
            dims,
            self.measure,
            level_of,
            base_dimension,
            self.pushed,
        )

    def with_pushed(self, dimension: str) -> "CubeSchema":
        if dimension not in self.dimensions:
            raise ModelError(f"unknown dimension {dimension!r}")
        return CubeSchema(
            self.fact_tag,
            self.collection_tag,
            self.dimensions,
            self.measure,
            dict(self.level_of),
            dict(self.base_dimension),
            self.pushed + (dimension,),
        )

    def with_pulled(self) -> "CubeSchema":
        """Promote the measure to the leading dimension slot.

        The promotion projects facts down to bare leaves, so any pushed
        member copies are dropped and the pushed list resets.
        """
        if self.measure is None:
            raise ModelError("cube has no measure to promote")
        dims = (self.measure,) + self.dimensions
        base = dict(self.base_dimension)
        base[self.measure] = self.measure
        level_of = dict(self.level_of)
        level_of[self.measure] = self.measure
        return CubeSchema(
            self.fact_tag,
            self.collection_tag,
            dims,
            None,
            level_of,
            base,
            (),
        )


# --- validation -----------------------------------------------------------------

BAD_FACT_TAG = "bad-fact-tag"
MISSING_DIMENSION = "missing-dimension"
OUT_OF_ORDER = "out-of-order"
NON_NUMERIC_MEASURE = "non-numeric-measure"
MEASURE_NOT_LAST = "measure-not-last"


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    fact_index: int
    message: str

    def __str__(self) -> str:
        return f"fact {self.fact_index}: {self.code}: {self.message}"


class CubeValidationError(ModelError):
    def __init__(self, issues: Sequence[ValidationIssue]):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


# --- cube -----------------------------------------------------------------------

@dataclass(frozen=True)
class CubeCellView:
    """One fact seen as a cube cell: coordinates per dimension, then the value."""

    coordinates: dict[str, str]
    value: Optional[str]

    def key(self) -> frozenset:
        return frozenset(self.coordinates.items())


@dataclass(frozen=True)
class TreeCube:
    """A schema, its fact data, and the hierarchies its dimensions refer to.

    data holds either loose fact trees or a single tree rooted at the
    collection tag whose children are the facts; both forms are accepted
    everywhere and fact_trees() normalizes them.
    """

    schema: CubeSchema
    data: TreeCollection
    hierarchies: "HierarchySet" = field(default_factory=lambda: HierarchySet())

    @property
    def is_rooted(self) -> bool:
        return (
            len(self.data) == 1
            and self.data[0].tag(self.data[0].root) == self.schema.collection_tag
        )

    def fact_trees(self) -> list[DataTree]:
        if self.is_rooted:
            doc = self.data[0]
            return [subtree_view(doc, kid) for kid in doc.children(doc.root)]
        return list(self.data)

    def fact_collection(self) -> TreeCollection:
        return TreeCollection.of(self.fact_trees())

    def with_data(
        self,
        data: TreeCollection,
        schema: Optional[CubeSchema] = None,
    ) -> "TreeCube":
        return TreeCube(schema or self.schema, data, self.hierarchies)

    def with_hierarchies(self, hierarchies: "HierarchySet") -> "TreeCube":
        return TreeCube(self.schema, self.data, hierarchies)

    def validate(self) -> list[ValidationIssue]:
        return validate(self)

    def to_cells(self) -> list[CubeCellView]:
        return to_cells(self)


def validate(cube: TreeCube) -> list[ValidationIssue]:
    """Every violation of the flat-fact shape, with stable codes; never raises."""
    schema = cube.schema
    issues: list[ValidationIssue] = []
    dims = set(schema.dimensions)
    order = {d: i for i, d in enumerate(schema.dimensions)}
    for index, fact in enumerate(cube.fact_trees()):
        root = fact.root
        if fact.tag(root) != schema.fact_tag:
            issues.append(
                ValidationIssue(
                    BAD_FACT_TAG,
                    index,
                    f"expected {schema.fact_tag!r}, found {fact.tag(root)!r}",
                )
            )
            continue  # a mistagged tree is not worth dissecting further
        kids = fact.children(root)
        tags = [fact.tag(k) for k in kids]
        for d in schema.dimensions:
            if tags.count(d) == 0:
                issues.append(
                    ValidationIssue(
                        MISSING_DIMENSION, index, f"missing dimension {d!r}"
                    )
                )
            elif tags.count(d) > 1:
                issues.append(
                    ValidationIssue(
                        OUT_OF_ORDER, index, f"dimension {d!r} appears twice"
                    )
                )
        for t in tags:
            if t not in dims and t != schema.measure:
                issues.append(
                    ValidationIssue(
                        OUT_OF_ORDER, index, f"unexpected child {t!r}"
                    )
                )
        seen_dims = [t for t in tags if t in dims]
        expected = sorted(set(seen_dims), key=lambda t: order[t])
        if list(dict.fromkeys(seen_dims)) != expected:
            issues.append(
                ValidationIssue(
                    OUT_OF_ORDER,
                    index,
                    f"dimension order {seen_dims} != schema order {expected}",
                )
            )
        for k, t in zip(kids, tags):
            if t in dims and fact.children(k):
                issues.append(
                    ValidationIssue(
                        OUT_OF_ORDER, index, f"dimension {t!r} is not a leaf"
                    )
                )
        if schema.measure is not None:
            mcount = tags.count(schema.measure)
            if mcount == 0:
                issues.append(
                    ValidationIssue(
                        MISSING_DIMENSION,
                        index,
                        f"missing measure {schema.measure!r}",
                    )
                )
            else:
                if mcount > 1:
                    issues.append(
                        ValidationIssue(
                            OUT_OF_ORDER,
                            index,
                            f"measure {schema.measure!r} appears twice",
                        )
                    )
                if tags[-1] != schema.measure:
                    issues.append(
                        ValidationIssue(
                            MEASURE_NOT_LAST,
                            index,
                            f"measure {schema.measure!r} must be the last child",
                        )
                    )
                mid = kids[tags.index(schema.measure)]
                if parse_number(fact.value(mid)) is None:
                    issues.append(
                        ValidationIssue(
                            NON_NUMERIC_MEASURE,
                            index,
                            f"measure value {fact.value(mid)!r} is not a number",
                        )
                    )
                under = [fact.tag(k) for k in fact.children(mid)]
                if tuple(under) != schema.pushed:
                    issues.append(
                        ValidationIssue(
                            OUT_OF_ORDER,
                            index,
                            f"children under measure {under} != pushed {list(schema.pushed)}",
                        )
                    )
    return issues


def to_cells(cube: TreeCube) -> list[CubeCellView]:
    """One cell per fact; raises on an invalid cube, quoting the first issue."""
    issues = validate(cube)
    if issues:
        raise CubeValidationError(issues)
    schema = cube.schema
    cells: list[CubeCellView] = []
    for fact in cube.fact_trees():
        coords: dict[str, str] = {}
        value: Optional[str] = None
        for kid in fact.children(fact.root):
            tag = fact.tag(kid)
            if tag in schema.dimensions:
                coords[tag] = fact.value(kid) or ""
            elif tag == schema.measure:
                value = fact.value(kid)
        cells.append(CubeCellView(coords, value))
    return cells


def from_cells(
    schema: CubeSchema,
    cells: Iterable[CubeCellView],
    hierarchies: Optional["HierarchySet"] = None,
) -> TreeCube:
    """Rebuild loose fact trees from cells (plain shape only)."""
    if schema.pushed:
        raise ModelError("from_cells supports the plain fact shape only")
    trees = []
    for cell in cells:
        children: list = [(d, cell.coordinates[d]) for d in schema.dimensions]
        if schema.measure is not None:
            children.append((schema.measure, cell.value))
        trees.append(build_tree((schema.fact_tag, None, children)))
    return TreeCube(
        schema, TreeCollection.of(trees), hierarchies or HierarchySet()
    )


# --- hierarchies ----------------------------------------------------------------

@dataclass(frozen=True)
class LevelMember:
    """One member of one hierarchy level, with its display value.

    For interior levels identified by a numbering attribute, value holds
    that number and attributes carries it under its attribute name; for
    leaf levels, value is the member text.
    """

    level: str
    value: str
    attributes: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class HierarchyTree:
    """One dimension's level structure: levels coarse to fine, member paths.

    dimension is the finest level's tag (the tag fact leaves use); name is
    the hierarchy's own root tag.  paths maps each finest member value to
    its chain of ancestors, coarse to fine, ending with the member itself.
    """

    name: str
    dimension: str
    levels: tuple[str, ...]
    paths: dict[str, tuple[LevelMember, ...]]
    tree: Optional[DataTree] = None

    def members(self) -> list[str]:
        return list(self.paths)

    def lookup(self, member: str, level: str) -> LevelMember:
        if level not in self.levels:
            raise ModelError(
                f"level {level!r} not in hierarchy {self.name!r} {self.levels}"
            )
        path = self.paths.get(member)
        if path is None:
            raise ModelError(f"member {member!r} not in hierarchy {self.name!r}")
        for entry in path:
            if entry.level == level:
                return entry
        raise ModelError(f"member {member!r} has no {level!r} ancestor")

    def is_coarser(self, a: str, b: str) -> bool:
        """True when level a is strictly coarser than level b."""
        if a not in self.levels or b not in self.levels:
            raise ModelError(f"unknown level among {a!r}, {b!r}")
        return self.levels.index(a) < self.levels.index(b)

    def members_under(self, level: str, value: str) -> list[str]:
        """Finest members whose ancestor at level has the given value."""
        out = []
        for member, path in self.paths.items():
            for entry in path:
                if entry.level == level and entry.value == value:
                    out.append(member)
                    break
        return out

    def record_tree(self) -> DataTree:
        """The hierarchy as flat records, one entry per finest member.

        Each entry holds one leaf per level, coarse to fine, tagged by the
        level and valued by the member's display value — the shape joins
        consume, so a level leaf can be grafted into a fact as-is.
        """
        b = TreeBuilder()
        root = b.new_node("records")
        for member in self.paths:
            entry = b.new_node("entry")
            b.add_child(root, entry)
            for part in self.paths[member]:
                b.add_child(entry, b.new_node(part.level, part.value))
        return b.build(root)


def hierarchy_from_tree(tree: DataTree, dimension: Optional[str] = None) -> HierarchyTree:
    """Interpret a parsed hierarchy document.

    The root tag is the hierarchy's name; each depth below it is one level,
    coarse over fine; an interior member's display value is its "num" child
    when present, else its own text.  The finest level's tag names the
    dimension.  Rejects members reachable twice (the mapping must be
    functional) and mixed tags at one depth.
    """
    root = tree.root
    name = tree.tag(root)
    levels: list[str] = []
    paths: dict[str, tuple[LevelMember, ...]] = {}

    def level_at(depth: int, tag: str) -> None:
        if depth < len(levels):
            if levels[depth] != tag:
                raise ModelError(
                    f"mixed tags at hierarchy depth {depth}: "
                    f"{levels[depth]!r} vs {tag!r}"
                )
        elif depth == len(levels):
            levels.append(tag)
        else:
            raise ModelError("hierarchy must be filled level by level")

    def walk(nid: int, depth: int, trail: tuple[LevelMember, ...]) -> None:
        tag = tree.tag(nid)
        level_at(depth, tag)
        attrs: dict[str, str] = {}
        structural = []
        for kid in tree.children(nid):
            if tree.tag(kid) == "num" and not tree.children(kid):
                attrs["num"] = tree.value(kid) or ""
            else:
                structural.append(kid)
        value = attrs.get("num", tree.value(nid) or "")
        member = LevelMember(tag, value, attrs)
        trail = trail + (member,)
        if not structural:
            leaf_value = tree.value(nid) or ""
            if leaf_value in paths:
                raise ModelError(
                    f"non-strict hierarchy: member {leaf_value!r} appears twice"
                )
            paths[leaf_value] = trail
            return
        for kid in structural:
            walk(kid, depth + 1, trail)

    for kid in tree.children(root):
        walk(kid, 0, ())
    if not levels:
        raise ModelError(f"hierarchy {name!r} has no members")
    dim = dimension or levels[-1]
    return HierarchyTree(name, dim, tuple(levels), paths, tree)


@dataclass(frozen=True)
class HierarchySet:
    """Hierarchies indexed by the dimension (finest level tag) they refine."""

    by_dimension: dict[str, HierarchyTree] = field(default_factory=dict)

    def add(self, h: HierarchyTree) -> "HierarchySet":
        merged = dict(self.by_dimension)
        merged[h.dimension] = h
        return HierarchySet(merged)

    def __len__(self) -> int:
        return len(self.by_dimension)

    def __iter__(self):
        return iter(self.by_dimension.values())

    def for_dimension(self, tag: str) -> HierarchyTree:
        """The hierarchy whose finest tag — or any level tag — matches."""
        if tag in self.by_dimension:
            return self.by_dimension[tag]
        for h in self.by_dimension.values():
            if tag in h.levels:
                return h
        raise ModelError(f"no hierarchy covers {tag!r}")

    def get(self, tag: str) -> Optional[HierarchyTree]:
        try:
            return self.for_dimension(tag)
        except ModelError:
            return None


def lookup_level(h: HierarchyTree, member: str, level: str) -> LevelMember:
    return h.lookup(member, level)

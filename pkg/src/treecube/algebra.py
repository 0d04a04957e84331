"""The ten tree-collection operators the cube operations compose.

Every operator consumes and produces TreeCollections, never mutates its
input, and emits trees with fresh node ids.  Recoverable oddities (an
unmatched update target, a dropped join subtree) go into the caller's
Report as warnings; contract violations raise OperatorError.

When a trace capture is active (see trace_capture) each operator appends
its name on entry, which is how the cube operations prove they reduce to
this algebra and nothing else.
"""

from __future__ import annotations

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation, localcontext
from fractions import Fraction
from typing import Iterator, Mapping, Optional, Sequence, Union

from .pattern import Embedding, PatternTree, match, witness, witness_projected, witness_with_sources
from .tree import DataTree, TreeBuilder, TreeCollection, deep_copy


class OperatorError(ValueError):
    """Raised when an operator's contract is violated."""


@dataclass
class Report:
    """Accumulates warnings for one operation."""

    warnings: list[str] = field(default_factory=list)

    def warn(self, message: str) -> None:
        self.warnings.append(message)


def _warn(report: Optional[Report], message: str) -> None:
    if report is not None:
        report.warn(message)


# --- tracing ------------------------------------------------------------------

_trace_var: ContextVar[Optional[list[str]]] = ContextVar("treecube_trace", default=None)


@contextmanager
def trace_capture() -> Iterator[list[str]]:
    """Collect the names of operators invoked inside the block."""
    token = _trace_var.set([])
    try:
        yield _trace_var.get()  # type: ignore[misc]
    finally:
        _trace_var.reset(token)


def _record(name: str) -> None:
    trace = _trace_var.get()
    if trace is not None:
        trace.append(name)


# --- numbers ------------------------------------------------------------------

def parse_number(text: Optional[str]) -> Optional[Fraction]:
    """Exact numeric value of a decimal string, or None."""
    if text is None:
        return None
    try:
        d = Decimal(text)
    except InvalidOperation:
        return None
    if not d.is_finite():
        return None
    return Fraction(d)


def render_number(x: Fraction) -> str:
    """Canonical decimal text: no trailing zeros, '.' separator, no exponent.

    Values without a finite decimal expansion are rounded half-even to 12
    significant digits.
    """
    if x.denominator == 1:
        return str(x.numerator)
    d = x.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    with localcontext() as ctx:
        ctx.rounding = ROUND_HALF_EVEN
        ctx.prec = 64 if d == 1 else 12
        q = Decimal(x.numerator) / Decimal(x.denominator)
    text = format(q, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text if text not in ("-0", "") else "0"


# --- operator argument types ----------------------------------------------------

@dataclass(frozen=True)
class ProjectionList:
    """Ordered pids to retain; pids in keeps carry their whole subtree."""

    pids: tuple[int, ...]
    keeps: frozenset[int] = frozenset()


@dataclass(frozen=True)
class OrderKey:
    """One sort key for reorder/group ordering.

    kind "text" compares leaf text, "numeric" compares decimal values
    (non-numbers sort last), "mapped" looks leaf text up in mapping, and
    "positional" indexes ranks by the occurrence's position in the matched
    sequence, which lets callers hand in an arbitrary precomputed
    permutation.
    """

    pid: int
    direction: str = "asc"  # asc | desc
    kind: str = "text"  # text | numeric | mapped | positional
    mapping: Optional[Mapping[str, int]] = None
    ranks: Optional[tuple[int, ...]] = None


@dataclass(frozen=True)
class JoinSpec:
    """How to join two collections.

    links lists (left pid, right pid) pairs whose leaf values must be equal.
    The kept right pids are grafted, as whole subtrees, under the matched
    left tree's witness root after its children.  When unit is set, that
    left pid marks the repeating subtree: the output then carries one merged
    tree per distinct graft, holding only the units that agree with it,
    which is how members get sub-grouped by their hierarchy ancestor.
    """

    left: PatternTree
    right: PatternTree
    links: tuple[tuple[int, int], ...]
    right_keep: tuple[int, ...]
    unit: Optional[int] = None


@dataclass(frozen=True)
class AggFunction:
    kind: str  # sum | count | avg | min | max
    measure: int  # pid of the measure leaf in the aggregation pattern

    def __post_init__(self) -> None:
        if self.kind not in ("sum", "count", "avg", "min", "max"):
            raise OperatorError(f"unknown aggregation {self.kind!r}")


# update directives, shared by copy_paste and aggregate
@dataclass(frozen=True)
class AttachCopyUnder:
    target: int


@dataclass(frozen=True)
class CopyValue:
    source: int


@dataclass(frozen=True)
class SetValue:
    target: int
    value: Union[str, CopyValue]


@dataclass(frozen=True)
class AppendAggregate:
    target: int
    tag: str


UpdateDirective = Union[AttachCopyUnder, SetValue, AppendAggregate]


@dataclass(frozen=True)
class MoveNode:
    source: int


@dataclass(frozen=True)
class InsertNode:
    """One insertion: a new leaf placed relative to the target pid's image.

    value may be a literal, a CopyValue reading another matched node, or a
    MoveNode which also removes the node it read.
    """

    target: int
    tag: str
    value: Union[str, CopyValue, MoveNode]
    position: str  # first-child | last-child | before | after


# --- tree surgery helper --------------------------------------------------------

# plan items: ("leaf", tag, value) or ("copy", source_tree, source_node_id)
_PlanItem = tuple


def _emit(b: TreeBuilder, parent: int, item: _PlanItem) -> None:
    if item[0] == "leaf":
        _, tag, value = item
        b.add_child(parent, b.new_node(tag, value))
    else:
        _, src_tree, src_id = item
        b.add_child(parent, b.copy_subtree(src_tree, src_id))


def _rewrite(
    tree: DataTree,
    *,
    drop: frozenset[int] = frozenset(),
    set_values: Optional[dict[int, Optional[str]]] = None,
    prepend: Optional[dict[int, list[_PlanItem]]] = None,
    append: Optional[dict[int, list[_PlanItem]]] = None,
    before: Optional[dict[int, list[_PlanItem]]] = None,
    after: Optional[dict[int, list[_PlanItem]]] = None,
) -> Optional[DataTree]:
    """Copy tree applying edits; returns None when the root itself is dropped."""
    set_values = set_values or {}
    prepend = prepend or {}
    append = append or {}
    before = before or {}
    after = after or {}
    b = TreeBuilder()

    def rec(nid: int) -> Optional[int]:
        if nid in drop:
            return None
        node = tree.node(nid)
        value = set_values.get(nid, node.value)
        out = b.new_node(node.tag, value)
        for item in prepend.get(nid, ()):
            _emit(b, out, item)
        for kid in node.children:
            for item in before.get(kid, ()):
                _emit(b, out, item)
            built = rec(kid)
            if built is not None:
                b.add_child(out, built)
            for item in after.get(kid, ()):
                _emit(b, out, item)
        for item in append.get(nid, ()):
            _emit(b, out, item)
        return out

    root = rec(tree.root)
    return None if root is None else b.build(root)


def _frozen_spec(tree: DataTree, nid: int) -> tuple:
    node = tree.node(nid)
    return (node.tag, node.value, tuple(_frozen_spec(tree, k) for k in node.children))


# --- the operators ---------------------------------------------------------------

def select(
    collection: TreeCollection,
    pattern: PatternTree,
    keep_subtrees: frozenset[int] = frozenset(),
    report: Optional[Report] = None,
) -> TreeCollection:
    """One witness tree per embedding; keep_subtrees pids keep their whole subtree."""
    _record("select")
    effective = pattern.with_keeps(keep_subtrees) if keep_subtrees else pattern
    out: list[DataTree] = []
    for tree in collection:
        for e in match(effective, tree):
            out.append(witness(e, effective))
    return TreeCollection.of(out)


def project(
    collection: TreeCollection,
    pattern: PatternTree,
    projection: ProjectionList,
    report: Optional[Report] = None,
) -> TreeCollection:
    """One tree per embedding holding only the projection pids, siblings in projection order."""
    _record("project")
    out: list[DataTree] = []
    for tree in collection:
        for e in match(pattern, tree):
            out.append(witness_projected(e, pattern, projection.pids, projection.keeps))
    return TreeCollection.of(out)


def product(collection: TreeCollection, root_tag: str = "sales") -> TreeCollection:
    """Single tree: a fresh root adopting copies of every input tree in order."""
    _record("product")
    b = TreeBuilder()
    root = b.new_node(root_tag)
    for tree in collection:
        b.add_child(root, b.copy_subtree(tree, tree.root))
    return TreeCollection.of([b.build(root)])


def join(
    left: TreeCollection,
    right: TreeCollection,
    spec: JoinSpec,
    report: Optional[Report] = None,
) -> TreeCollection:
    """Merge left trees with the kept parts of link-matching right trees.

    Left trees with no link match anywhere are dropped (with a warning).
    See JoinSpec for the unit sub-grouping mode.
    """
    _record("join")
    left_links = [lp for lp, _ in spec.links]
    right_links = [rp for _, rp in spec.links]

    # index every right embedding by its link key
    right_index: dict[tuple, list[tuple[DataTree, Embedding]]] = {}
    for rtree in right:
        for e in match(spec.right, rtree):
            key = tuple(e.image_value(rp) for rp in right_links)
            right_index.setdefault(key, []).append((rtree, e))

    def graft_items(rtree: DataTree, e: Embedding) -> list[_PlanItem]:
        return [("copy", rtree, e.image(pid)) for pid in spec.right_keep]

    def graft_key(rtree: DataTree, e: Embedding) -> tuple:
        return tuple(_frozen_spec(rtree, e.image(pid)) for pid in spec.right_keep)

    out: list[DataTree] = []
    for ltree in left:
        embeddings = match(spec.left, ltree)
        if spec.unit is None:
            hit = False
            for e in embeddings:
                key = tuple(e.image_value(lp) for lp in left_links)
                for rtree, re_ in right_index.get(key, ()):
                    merged_base = witness(e, spec.left)
                    merged = _rewrite(
                        merged_base,
                        append={merged_base.root: graft_items(rtree, re_)},
                    )
                    assert merged is not None
                    out.append(merged)
                    hit = True
            if not hit:
                _warn(report, "join: tree dropped, no link match")
            continue

        # unit mode: one merged tree per distinct graft, holding only the
        # units that produced it
        if not embeddings:
            _warn(report, "join: tree dropped, pattern did not match")
            continue
        base, sources = witness_with_sources(embeddings[0], spec.left)
        out_of_src = {src: out_id for out_id, src in sources.items()}
        buckets: dict[tuple, dict] = {}
        all_units: set[int] = set()
        for e in embeddings:
            unit_src = e.image(spec.unit)
            all_units.add(unit_src)
            key = tuple(e.image_value(lp) for lp in left_links)
            matches = right_index.get(key, ())
            if not matches:
                _warn(
                    report,
                    f"join: subtree dropped, no match for link value {key!r}",
                )
                continue
            for rtree, re_ in matches:
                gkey = graft_key(rtree, re_)
                bucket = buckets.setdefault(
                    gkey, {"items": graft_items(rtree, re_), "units": set()}
                )
                bucket["units"].add(unit_src)
        if not buckets:
            _warn(report, "join: tree dropped, no link match")
            continue
        for bucket in buckets.values():
            excluded = all_units - bucket["units"]
            merged = _rewrite(
                base,
                drop=frozenset(out_of_src[u] for u in excluded),
                append={base.root: bucket["items"]},
            )
            assert merged is not None
            out.append(merged)
    return TreeCollection.of(out)


def group(
    collection: TreeCollection,
    pattern: PatternTree,
    key_pids: Sequence[int],
    order_keys: Optional[Sequence[OrderKey]] = None,
    report: Optional[Report] = None,
    *,
    root_tag: str = "group",
    wrapper_tag: str = "group-by",
    inline_keys: bool = False,
) -> TreeCollection:
    """One tree per realized key combination, keys in first-occurrence order.

    The default shape is a "group" root whose first child is a "group-by"
    node holding key leaf copies, followed by the member witnesses; with
    inline_keys the key copies sit directly under the root, which lets a
    caller shape groups as facts.  An empty key_pids yields a single group of
    everything.
    """
    _record("group")
    entries: list[tuple[tuple, DataTree, Embedding]] = []
    for tree in collection:
        for e in match(pattern, tree):
            key = tuple(e.image_value(pid) for pid in key_pids)
            entries.append((key, tree, e))
    buckets: dict[tuple, list[tuple[DataTree, Embedding]]] = {}
    for key, tree, e in entries:
        buckets.setdefault(key, []).append((tree, e))

    out: list[DataTree] = []
    for key, members in buckets.items():
        b = TreeBuilder()
        root = b.new_node(root_tag)
        key_parent = root
        if not inline_keys:
            key_parent = b.new_node(wrapper_tag)
            b.add_child(root, key_parent)
        first_tree, first_e = members[0]
        for pid in key_pids:
            b.add_child(key_parent, b.copy_subtree(first_tree, first_e.image(pid)))
        ordered = members
        if order_keys:
            ordered = _sorted_by_keys(
                members, order_keys, lambda m, ok: m[1].value(m[2].image(ok.pid))
            )
        for tree, e in ordered:
            b.add_child(root, b.copy_subtree(*_witness_ids(tree, e, pattern)))
        out.append(b.build(root))
    return TreeCollection.of(out)


def _witness_ids(tree: DataTree, e: Embedding, pattern: PatternTree) -> tuple[DataTree, int]:
    w = witness(e, pattern)
    return w, w.root


def _sorted_by_keys(items: list, okeys: Sequence[OrderKey], read) -> list:
    decorated = list(items)
    for ok in reversed(list(okeys)):
        def sort_key(item, _ok=ok):
            value = read(item, _ok)
            if _ok.kind == "numeric":
                num = parse_number(value)
                return (1, Fraction(0)) if num is None else (0, num)
            if _ok.kind == "mapped":
                assert _ok.mapping is not None
                return _ok.mapping.get(value or "", len(_ok.mapping))
            return value or ""
        decorated.sort(key=sort_key, reverse=(ok.direction == "desc"))
    return decorated


def aggregate(
    collection: TreeCollection,
    pattern: PatternTree,
    agg: AggFunction,
    updates: Sequence[UpdateDirective],
    key_pids: Optional[Sequence[int]] = None,
    report: Optional[Report] = None,
) -> TreeCollection:
    """Replace the matched measure leaves with one aggregated leaf per directive.

    Without key_pids each tree aggregates its own matches.  With key_pids, trees are
    grouped by the values at those pids and each group collapses to its
    first tree carrying the aggregate over the whole group, which is how a
    re-aggregation at a coarser key is expressed.

    Empty matches yield 0 for sum and count; avg, min, and max pass the
    tree through with a warning.  Non-numeric measures are an error except
    under count.
    """
    _record("aggregate")
    appends = [d for d in updates if isinstance(d, AppendAggregate)]
    if not appends or len(appends) != len(updates):
        raise OperatorError("aggregate expects AppendAggregate directives only")

    def measures(tree: DataTree, embeddings: list[Embedding]) -> list[int]:
        seen: list[int] = []
        got: set[int] = set()
        for e in embeddings:
            nid = e.image(agg.measure)
            if nid not in got:
                got.add(nid)
                seen.append(nid)
        return sorted(seen, key=tree.doc_index)

    def combine(values: list[Optional[str]]) -> str:
        if agg.kind == "count":
            return str(len(values))
        numbers = []
        for v in values:
            num = parse_number(v)
            if num is None:
                raise OperatorError(
                    f"aggregate {agg.kind}: non-numeric measure value {v!r}"
                )
            numbers.append(num)
        if agg.kind == "sum":
            return render_number(sum(numbers, Fraction(0)))
        if agg.kind == "avg":
            return render_number(sum(numbers, Fraction(0)) / len(numbers))
        if agg.kind == "min":
            return render_number(min(numbers))
        return render_number(max(numbers))

    def emit(tree: DataTree, embeddings: list[Embedding], values: list) -> DataTree:
        drop = frozenset(measures(tree, embeddings))
        append: dict[int, list[_PlanItem]] = {}
        for d in appends:
            target = (
                embeddings[0].image(d.target) if embeddings else tree.root
            )
            append.setdefault(target, []).append(("leaf", d.tag, combine(values)))
        result = _rewrite(tree, drop=drop, append=append)
        assert result is not None
        return result

    per_tree: list[tuple[DataTree, list[Embedding], list]] = []
    for tree in collection:
        embeddings = match(pattern, tree)
        values = [tree.value(nid) for nid in measures(tree, embeddings)]
        per_tree.append((tree, embeddings, values))

    out: list[DataTree] = []
    if key_pids is None:
        for tree, embeddings, values in per_tree:
            if not values and agg.kind not in ("sum", "count"):
                _warn(report, f"aggregate {agg.kind}: no matches, tree passed through")
                out.append(deep_copy(tree))
                continue
            out.append(emit(tree, embeddings, values))
        return TreeCollection.of(out)

    groups: dict[tuple, dict] = {}
    for tree, embeddings, values in per_tree:
        if not embeddings:
            _warn(report, "aggregate: ungrouped tree passed through")
            out.append(deep_copy(tree))
            continue
        key = tuple(embeddings[0].image_value(pid) for pid in key_pids)
        bucket = groups.setdefault(
            key, {"tree": tree, "embeddings": embeddings, "values": []}
        )
        bucket["values"].extend(values)
    for bucket in groups.values():
        out.append(emit(bucket["tree"], bucket["embeddings"], bucket["values"]))
    return TreeCollection.of(out)


def reorder(
    collection: TreeCollection,
    pattern: PatternTree,
    order_keys: Sequence[OrderKey],
    sort_pids: frozenset[int],
    report: Optional[Report] = None,
) -> TreeCollection:
    """Stably re-sort the sort_pids-matched subtrees among themselves by order_keys.

    Matched subtrees permute within the sibling slots they already occupy;
    unmatched siblings do not move.  When the matched subtrees are whole
    trees, the collection itself is re-sorted instead.
    """
    _record("reorder")

    # occurrences, in collection/document order; each keeps the first
    # embedding that produced it so value keys can read any pattern node
    occurrences: list[tuple[int, DataTree, int, Embedding]] = []
    for ti, tree in enumerate(collection):
        seen: set[int] = set()
        for e in match(pattern, tree):
            for pid in sort_pids:
                nid = e.image(pid)
                if nid not in seen:
                    seen.add(nid)
                    occurrences.append((ti, tree, nid, e))
    occurrences.sort(key=lambda occ: (occ[0], occ[1].doc_index(occ[2])))

    position = {(ti, nid): i for i, (ti, tree, nid, _) in enumerate(occurrences)}

    def stable_sort(items: list[tuple[int, DataTree, int, Embedding]]) -> list:
        indexed = list(enumerate(items))
        for ok_i in range(len(order_keys) - 1, -1, -1):
            ok = order_keys[ok_i]
            def sk(pair):
                idx, (ti, tree, nid, e) = pair
                if ok.kind == "positional":
                    assert ok.ranks is not None
                    return ok.ranks[position[(ti, nid)]]
                value = e.image_value(ok.pid) or ""
                if ok.kind == "numeric":
                    num = parse_number(value)
                    return (1, Fraction(0)) if num is None else (0, num)
                if ok.kind == "mapped":
                    assert ok.mapping is not None
                    return ok.mapping.get(value, len(ok.mapping))
                return value
            indexed.sort(key=sk, reverse=(ok.direction == "desc"))
        return [item for _, item in indexed]

    collection_mode = bool(occurrences) and all(
        nid == tree.root for _, tree, nid, _ in occurrences
    )
    if collection_mode:
        matched_tis = {ti for ti, _, _, _ in occurrences}
        ordered = stable_sort(occurrences)
        slot_trees = iter(ordered)
        out = []
        for ti, tree in enumerate(collection):
            if ti in matched_tis:
                _, chosen, _, _ = next(slot_trees)
                out.append(deep_copy(chosen))
            else:
                out.append(deep_copy(tree))
        return TreeCollection.of(out)

    by_tree: dict[int, list[tuple[int, DataTree, int, Embedding]]] = {}
    for occ in occurrences:
        by_tree.setdefault(occ[0], []).append(occ)
    out = []
    for ti, tree in enumerate(collection):
        occs = by_tree.get(ti)
        if not occs:
            out.append(deep_copy(tree))
            continue
        by_parent: dict[int, list[tuple[int, DataTree, int, Embedding]]] = {}
        for occ in occs:
            parent = tree.parent(occ[2])
            if parent is None:
                raise OperatorError("reorder cannot mix root and subtree matches")
            by_parent.setdefault(parent, []).append(occ)
        replacement: dict[int, int] = {}
        for parent, group_occs in by_parent.items():
            slots = [nid for _, _, nid, _ in group_occs]
            ordered = stable_sort(group_occs)
            for slot, (_, _, nid, _) in zip(slots, ordered):
                replacement[slot] = nid

        b = TreeBuilder()

        def walk(nid: int) -> int:
            source = replacement.get(nid, nid)
            node = tree.node(source)
            fresh = b.new_node(node.tag, node.value)
            for kid in tree.children(source):
                b.add_child(fresh, walk(kid))
            return fresh

        out.append(b.build(walk(tree.root)))
    return TreeCollection.of(out)


def copy_paste(
    collection: TreeCollection,
    pattern: PatternTree,
    copy_pids: Sequence[int],
    updates: Sequence[UpdateDirective],
    report: Optional[Report] = None,
) -> TreeCollection:
    """Copy the copy_pids subtrees and apply the update directives, per embedding."""
    _record("copy_paste")
    out: list[DataTree] = []
    for tree in collection:
        embeddings = match(pattern, tree)
        if not embeddings:
            _warn(report, "copy_paste: pattern did not match, tree passed through")
            out.append(deep_copy(tree))
            continue
        append: dict[int, list[_PlanItem]] = {}
        set_values: dict[int, Optional[str]] = {}
        for e in embeddings:
            for d in updates:
                if isinstance(d, AttachCopyUnder):
                    items = append.setdefault(e.image(d.target), [])
                    for src_pid in copy_pids:
                        items.append(("copy", tree, e.image(src_pid)))
                elif isinstance(d, SetValue):
                    value = (
                        e.image_value(d.value.source)
                        if isinstance(d.value, CopyValue)
                        else d.value
                    )
                    set_values[e.image(d.target)] = value
                else:
                    raise OperatorError(
                        "copy_paste supports AttachCopyUnder and SetValue only"
                    )
        result = _rewrite(tree, append=append, set_values=set_values)
        assert result is not None
        out.append(result)
    return TreeCollection.of(out)


def delete_nodes(
    collection: TreeCollection,
    pattern: PatternTree,
    delete_pids: frozenset[int],
    report: Optional[Report] = None,
) -> TreeCollection:
    """Remove every delete_pids-matched node with its subtree; deleting a root drops the tree."""
    _record("delete_nodes")
    out: list[DataTree] = []
    for tree in collection:
        condemned: set[int] = set()
        for e in match(pattern, tree):
            for pid in delete_pids:
                condemned.add(e.image(pid))
        if tree.root in condemned:
            _warn(report, "delete_nodes: root deleted, tree dropped")
            continue
        result = _rewrite(tree, drop=frozenset(condemned))
        assert result is not None
        out.append(result)
    return TreeCollection.of(out)


def insert_nodes(
    collection: TreeCollection,
    pattern: PatternTree,
    inserts: Sequence[InsertNode],
    report: Optional[Report] = None,
) -> TreeCollection:
    """Insert one new leaf per (embedding, directive) at the requested position."""
    _record("insert_nodes")
    valid = {"first-child", "last-child", "before", "after"}
    for item in inserts:
        if item.position not in valid:
            raise OperatorError(f"unknown insert position {item.position!r}")
        if not item.tag:
            raise OperatorError("insert_nodes needs a tag for the new leaf")
    out: list[DataTree] = []
    for tree in collection:
        embeddings = match(pattern, tree)
        if not embeddings and inserts:
            _warn(report, "insert_nodes: pattern did not match, tree passed through")
            out.append(deep_copy(tree))
            continue
        prepend: dict[int, list[_PlanItem]] = {}
        append: dict[int, list[_PlanItem]] = {}
        before: dict[int, list[_PlanItem]] = {}
        after: dict[int, list[_PlanItem]] = {}
        drop: set[int] = set()
        for e in embeddings:
            for item in inserts:
                if isinstance(item.value, (CopyValue, MoveNode)):
                    value = e.image_value(item.value.source)
                    if isinstance(item.value, MoveNode):
                        moved = e.image(item.value.source)
                        if not tree.is_leaf(moved):
                            raise OperatorError(
                                "insert_nodes can only move leaves"
                            )
                        drop.add(moved)
                else:
                    value = item.value
                leaf: _PlanItem = ("leaf", item.tag, value)
                target = e.image(item.target)
                if item.position == "first-child":
                    prepend.setdefault(target, []).append(leaf)
                elif item.position == "last-child":
                    append.setdefault(target, []).append(leaf)
                elif item.position == "before":
                    before.setdefault(target, []).append(leaf)
                else:
                    after.setdefault(target, []).append(leaf)
        result = _rewrite(
            tree,
            drop=frozenset(drop),
            prepend=prepend,
            append=append,
            before=before,
            after=after,
        )
        assert result is not None
        out.append(result)
    return TreeCollection.of(out)

"""Tree patterns and their embeddings into data trees.

A pattern is a small tree of predicate nodes joined by child or descendant
edges.  Matching finds every injective mapping of pattern nodes onto data
nodes that respects the edges and predicates; each mapping (an Embedding)
can then be rendered as a witness tree that keeps exactly the mapped nodes,
plus whole subtrees where the pattern asked for them.

Witness sibling order is driven by the pattern, not the data: under a
pattern node without keep_subtree, the output children are the mapped
pattern children in pattern order; under a keep_subtree node the full
subtree is copied and the mapped direct children are permuted into pattern
order among the source positions they occupy, leaving unmatched siblings
where they were.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Iterable, Optional, Sequence, Union

from .tree import DataTree, TreeBuilder


class PatternError(ValueError):
    """Raised for malformed patterns or pattern text."""


class Axis(Enum):
    CHILD = "child"
    DESCENDANT = "descendant"


# --- predicates -------------------------------------------------------------

@dataclass(frozen=True)
class AnyTag:
    def matches(self, tag: str) -> bool:
        return True


@dataclass(frozen=True)
class TagEquals:
    name: str

    def matches(self, tag: str) -> bool:
        return tag == self.name


TagPred = Union[AnyTag, TagEquals]


def _as_number(text: Optional[str]) -> Optional[Decimal]:
    if text is None:
        return None
    try:
        d = Decimal(text)
    except InvalidOperation:
        return None
    return d if d.is_finite() else None


@dataclass(frozen=True)
class AnyValue:
    def matches(self, value: Optional[str]) -> bool:
        return True


@dataclass(frozen=True)
class ValueEquals:
    ref: str

    def matches(self, value: Optional[str]) -> bool:
        return value == self.ref


@dataclass(frozen=True)
class ValueIn:
    options: frozenset[str]

    def matches(self, value: Optional[str]) -> bool:
        return value is not None and value in self.options


@dataclass(frozen=True)
class ValueCompare:
    """Numeric comparison; ordering ops are false unless both sides are numbers.

    The "=" op falls back to exact string equality when either side does not
    parse as a decimal number.
    """

    op: str  # one of < <= = >= >
    ref: str

    def matches(self, value: Optional[str]) -> bool:
        left = _as_number(value)
        right = _as_number(self.ref)
        if left is None or right is None:
            return self.op == "=" and value == self.ref
        if self.op == "<":
            return left < right
        if self.op == "<=":
            return left <= right
        if self.op == "=":
            return left == right
        if self.op == ">=":
            return left >= right
        if self.op == ">":
            return left > right
        raise PatternError(f"unknown comparison op {self.op!r}")


ValuePred = Union[AnyValue, ValueEquals, ValueIn, ValueCompare]


# --- pattern trees ----------------------------------------------------------

@dataclass(frozen=True)
class PatternNode:
    pid: int
    tag: TagPred
    value: ValuePred
    keep_subtree: bool = False


ANCHOR_ROOT = "root"
ANCHOR_ANYWHERE = "anywhere"


class PatternTree:
    """Immutable pattern: predicate nodes, edges with axes, and an anchor mode.

    anchor "root" binds the pattern root to the data tree root only;
    "anywhere" lets it bind to any node, like a leading // step.
    """

    def __init__(
        self,
        root: int,
        nodes: dict[int, PatternNode],
        edges: dict[int, tuple[tuple[int, Axis], ...]],
        anchor: str = ANCHOR_ROOT,
    ):
        if anchor not in (ANCHOR_ROOT, ANCHOR_ANYWHERE):
            raise PatternError(f"unknown anchor mode {anchor!r}")
        self.root = root
        self.nodes = nodes
        self.edges = edges
        self.anchor = anchor
        self._parents: dict[int, tuple[int, Axis]] = {}
        for parent, kids in edges.items():
            for child, axis in kids:
                self._parents[child] = (parent, axis)
        order: list[int] = []
        stack = [root]
        while stack:
            pid = stack.pop()
            order.append(pid)
            for child, _ in reversed(edges.get(pid, ())):
                stack.append(child)
        self._preorder = tuple(order)
        if len(order) != len(nodes):
            raise PatternError("pattern edges do not form a single tree")

    def preorder(self) -> tuple[int, ...]:
        return self._preorder

    def children(self, pid: int) -> tuple[tuple[int, Axis], ...]:
        return self.edges.get(pid, ())

    def parent_of(self, pid: int) -> tuple[int, Axis]:
        return self._parents[pid]

    def with_keeps(self, keeps: Iterable[int]) -> "PatternTree":
        """Copy of this pattern with keep_subtree also set on the given pids."""
        extra = set(keeps)
        unknown = extra - set(self.nodes)
        if unknown:
            raise PatternError(f"keep list names unknown pids {sorted(unknown)}")
        nodes = {
            pid: (
                PatternNode(pid, n.tag, n.value, True)
                if pid in extra and not n.keep_subtree
                else n
            )
            for pid, n in self.nodes.items()
        }
        return PatternTree(self.root, nodes, self.edges, self.anchor)


class PatternBuilder:
    """Incremental construction of PatternTrees with sequential pids."""

    def __init__(self) -> None:
        self._nodes: dict[int, PatternNode] = {}
        self._edges: dict[int, list[tuple[int, Axis]]] = {}
        self._root: Optional[int] = None

    def add(
        self,
        tag: Optional[str] = None,
        *,
        parent: Optional[int] = None,
        axis: Axis = Axis.CHILD,
        value: Optional[ValuePred] = None,
        value_eq: Optional[str] = None,
        value_in: Optional[Iterable[str]] = None,
        keep: bool = False,
    ) -> int:
        pid = len(self._nodes)
        tag_pred: TagPred = AnyTag() if tag is None else TagEquals(tag)
        if value is None:
            if value_eq is not None:
                value = ValueEquals(value_eq)
            elif value_in is not None:
                value = ValueIn(frozenset(value_in))
            else:
                value = AnyValue()
        self._nodes[pid] = PatternNode(pid, tag_pred, value, keep)
        if parent is None:
            if self._root is not None:
                raise PatternError("pattern already has a root")
            self._root = pid
        else:
            self._edges.setdefault(parent, []).append((pid, axis))
        return pid

    def build(self, anchor: str = ANCHOR_ROOT) -> PatternTree:
        if self._root is None:
            raise PatternError("empty pattern")
        return PatternTree(
            self._root,
            dict(self._nodes),
            {p: tuple(kids) for p, kids in self._edges.items()},
            anchor,
        )


# --- matching ---------------------------------------------------------------

@dataclass(frozen=True)
class Embedding:
    """One injective assignment of pattern pids to node ids of a tree."""

    tree: DataTree
    assignment: dict[int, int]

    def image(self, pid: int) -> int:
        return self.assignment[pid]

    def image_value(self, pid: int) -> Optional[str]:
        return self.tree.value(self.assignment[pid])


def _satisfies(pnode: PatternNode, tree: DataTree, nid: int) -> bool:
    node = tree.node(nid)
    return pnode.tag.matches(node.tag) and pnode.value.matches(node.value)


def match(pattern: PatternTree, tree: DataTree) -> list[Embedding]:
    """All embeddings of pattern into tree, in document order of the root
    image with ties broken by the images of later pattern nodes in preorder."""
    order = pattern.preorder()
    results: list[Embedding] = []
    assignment: dict[int, int] = {}
    used: set[int] = set()

    def candidates(i: int) -> Iterable[int]:
        pid = order[i]
        if i == 0:
            if pattern.anchor == ANCHOR_ROOT:
                return (tree.root,)
            return tree.doc_order()
        parent_pid, axis = pattern.parent_of(pid)
        base = assignment[parent_pid]
        if axis is Axis.CHILD:
            return tree.children(base)
        return tree.descendants(base)

    def extend(i: int) -> None:
        if i == len(order):
            results.append(Embedding(tree, dict(assignment)))
            return
        pid = order[i]
        pnode = pattern.nodes[pid]
        for nid in candidates(i):
            if nid in used or not _satisfies(pnode, tree, nid):
                continue
            assignment[pid] = nid
            used.add(nid)
            extend(i + 1)
            used.discard(nid)
            del assignment[pid]

    extend(0)
    return results


# --- witnesses --------------------------------------------------------------

def witness(embedding: Embedding, pattern: PatternTree) -> DataTree:
    tree, _ = witness_with_sources(embedding, pattern)
    return tree


def witness_with_sources(
    embedding: Embedding, pattern: PatternTree
) -> tuple[DataTree, dict[int, int]]:
    """Render an embedding as a fresh tree, also mapping output ids to source ids."""
    t = embedding.tree
    b = TreeBuilder()
    sources: dict[int, int] = {}

    def copy_verbatim(nid: int) -> int:
        node = t.node(nid)
        out = b.new_node(node.tag, node.value)
        sources[out] = nid
        for kid in node.children:
            b.add_child(out, copy_verbatim(kid))
        return out

    def render(pid: int, inherited_keep: bool) -> int:
        nid = embedding.image(pid)
        node = t.node(nid)
        kids = pattern.children(pid)
        keep = inherited_keep or pattern.nodes[pid].keep_subtree
        out = b.new_node(node.tag, node.value)
        sources[out] = nid
        if keep:
            direct = {
                embedding.image(cpid): cpid
                for cpid, _ in kids
                if t.parent(embedding.image(cpid)) == nid
            }
            queue = [cpid for cpid, _ in kids if embedding.image(cpid) in direct]
            qi = 0
            for kid in node.children:
                if kid in direct:
                    b.add_child(out, render(queue[qi], True))
                    qi += 1
                else:
                    b.add_child(out, copy_verbatim(kid))
        else:
            for cpid, _ in kids:
                b.add_child(out, render(cpid, False))
        return out

    root = render(pattern.root, False)
    return b.build(root), sources


def witness_projected(
    embedding: Embedding,
    pattern: PatternTree,
    retained: Sequence[int],
    keeps: frozenset[int] = frozenset(),
) -> DataTree:
    """Witness keeping only the retained pids, siblings ordered by the retained list.

    A retained node's output parent is its nearest retained pattern ancestor;
    exactly one retained pid may lack one, and it becomes the output root.
    Pids in keeps carry their whole data subtree along.
    """
    unknown = set(retained) - set(pattern.nodes)
    if unknown:
        raise PatternError(f"projection names unknown pids {sorted(unknown)}")
    if len(set(retained)) != len(retained):
        raise PatternError("projection lists a pid twice")
    retained_set = set(retained)
    rank = {pid: i for i, pid in enumerate(retained)}

    def nearest(pid: int) -> Optional[int]:
        cur = pid
        while cur != pattern.root:
            cur, _ = pattern.parent_of(cur)
            if cur in retained_set:
                return cur
        return None

    parents = {pid: nearest(pid) for pid in retained}
    roots = [pid for pid, par in parents.items() if par is None]
    if len(roots) != 1:
        raise PatternError(
            f"projection must have exactly one top node, got {len(roots)}"
        )
    children: dict[int, list[int]] = {pid: [] for pid in retained}
    for pid in sorted(retained_set, key=lambda p: rank[p]):
        par = parents[pid]
        if par is not None:
            children[par].append(pid)

    t = embedding.tree
    b = TreeBuilder()

    def render(pid: int) -> int:
        nid = embedding.image(pid)
        if pid in keeps:
            if children[pid]:
                raise PatternError("keep_subtree projection entries must be leaves")
            return b.copy_subtree(t, nid)
        node = t.node(nid)
        out = b.new_node(node.tag, node.value)
        for kid in children[pid]:
            b.add_child(out, render(kid))
        return out

    return b.build(render(roots[0]))


# --- textual form ------------------------------------------------------------

def parse_pattern(text: str) -> PatternTree:
    """Parse the compact path form of patterns.

    Examples::

        sale{keep}/city[=Lyon]
        sale/(product,city,year,amount){keep}
        //department[num=69]

    Steps are separated by "/" (child) or "//" (descendant); a leading "//"
    anchors the pattern anywhere instead of at the tree root.  A step is a
    tag name or "*", with optional [predicate] filters and a {keep} flag.
    Predicates: [=v], [<v], [<=v], [>=v], [>v], [in a|b|c], and [name=v]
    which adds a child leaf condition.  A parenthesized group fans out into
    several children; a trailing {keep} distributes over the group.
    """
    parser = _PatternParser(text)
    return parser.parse()


class _PatternParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.builder = PatternBuilder()

    def parse(self) -> PatternTree:
        anchor = ANCHOR_ROOT
        if self._peek2() == "//":
            self.pos += 2
            anchor = ANCHOR_ANYWHERE
        self._parse_path(parent=None, axis=Axis.CHILD)
        self._skip_ws()
        if self.pos != len(self.text):
            raise PatternError(f"trailing input at {self.pos}: {self.text[self.pos:]!r}")
        return self.builder.build(anchor)

    # path := step ((“/”|“//”) step)*
    def _parse_path(self, parent: Optional[int], axis: Axis) -> list[int]:
        tips = self._parse_step(parent, axis)
        while True:
            self._skip_ws()
            nxt = self._peek2()
            if nxt == "//":
                self.pos += 2
                next_axis = Axis.DESCENDANT
            elif nxt[:1] == "/":
                self.pos += 1
                next_axis = Axis.CHILD
            else:
                return tips
            if len(tips) != 1:
                raise PatternError("cannot extend a group with a further path")
            tips = self._parse_step(tips[0], next_axis)

    def _parse_step(self, parent: Optional[int], axis: Axis) -> list[int]:
        self._skip_ws()
        if self._peek() == "(":
            self.pos += 1
            members: list[int] = []
            while True:
                branch_tips = self._parse_path(parent, axis)
                members.extend(branch_tips)
                self._skip_ws()
                if self._peek() == ",":
                    self.pos += 1
                    continue
                if self._peek() == ")":
                    self.pos += 1
                    break
                raise PatternError(f"expected ',' or ')' at {self.pos}")
            if self._try_keep():
                for pid in members:
                    self._set_keep(pid)
            return members
        name = self._read_name()
        if not name:
            raise PatternError(f"expected a step name at {self.pos}")
        tag = None if name == "*" else name
        pid = self.builder.add(tag, parent=parent, axis=axis)
        while self._peek() == "[":
            self._parse_predicate(pid)
        if self._try_keep():
            self._set_keep(pid)
        return [pid]

    def _parse_predicate(self, pid: int) -> None:
        assert self._peek() == "["
        self.pos += 1
        self._skip_ws()
        if self.text[self.pos :].startswith("in "):
            self.pos += 3
            options = [self._read_value()]
            while self._peek() == "|":
                self.pos += 1
                options.append(self._read_value())
            self._expect("]")
            self._set_value(pid, ValueIn(frozenset(options)))
            return
        op = self._read_op()
        if op is not None:
            ref = self._read_value()
            self._expect("]")
            if op == "=":
                self._set_value(pid, ValueEquals(ref))
            else:
                self._set_value(pid, ValueCompare(op, ref))
            return
        name = self._read_name()
        inner_op = self._read_op()
        if not name or inner_op is None:
            raise PatternError(f"bad predicate at {self.pos}")
        ref = self._read_value()
        self._expect("]")
        child = self.builder.add(name, parent=pid)
        if inner_op == "=":
            self._set_value(child, ValueEquals(ref))
        else:
            self._set_value(child, ValueCompare(inner_op, ref))

    # builder nodes are frozen; predicates and flags are patched in place
    def _set_value(self, pid: int, pred: ValuePred) -> None:
        n = self.builder._nodes[pid]
        self.builder._nodes[pid] = PatternNode(n.pid, n.tag, pred, n.keep_subtree)

    def _set_keep(self, pid: int) -> None:
        n = self.builder._nodes[pid]
        self.builder._nodes[pid] = PatternNode(n.pid, n.tag, n.value, True)

    def _try_keep(self) -> bool:
        self._skip_ws()
        if self.text[self.pos :].startswith("{keep}"):
            self.pos += len("{keep}")
            return True
        return False

    def _read_op(self) -> Optional[str]:
        for op in ("<=", ">=", "<", ">", "="):
            if self.text[self.pos :].startswith(op):
                self.pos += len(op)
                return op
        return None

    def _read_name(self) -> str:
        self._skip_ws()
        start = self.pos
        while self.pos < len(self.text):
            c = self.text[self.pos]
            if c in _STOPS_NAME or c.isspace():
                break
            self.pos += 1
        return self.text[start : self.pos]

    def _read_value(self) -> str:
        self._skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] not in "]|":
            self.pos += 1
        value = self.text[start : self.pos].strip()
        if not value:
            raise PatternError(f"empty predicate value at {start}")
        return value

    def _expect(self, c: str) -> None:
        self._skip_ws()
        if self._peek() != c:
            raise PatternError(f"expected {c!r} at {self.pos}")
        self.pos += 1

    def _peek(self) -> str:
        return self.text[self.pos : self.pos + 1]

    def _peek2(self) -> str:
        return self.text[self.pos : self.pos + 2]

    def _skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1


_STOPS_NAME = set("/[](){},|<>=")

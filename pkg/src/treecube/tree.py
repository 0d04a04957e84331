"""Ordered labeled trees: nodes with a tag, optional text value, and ordered children.

Trees are immutable once constructed; every operation that changes shape
builds a new tree with freshly allocated node ids, so two trees never share
ids and can always be told apart by id while still comparing equal
structurally.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

_fresh_ids = itertools.count(1)


class TreeError(ValueError):
    """Raised for malformed tree construction requests."""


def next_id() -> int:
    """Allocate a process-wide unique node id."""
    return next(_fresh_ids)


@dataclass(frozen=True)
class Node:
    id: int
    tag: str
    value: Optional[str]
    children: tuple[int, ...] = ()


class DataTree:
    """A rooted ordered tree of Nodes indexed by id.

    Treat instances as immutable: all mutators live in TreeBuilder, and the
    algebra returns new trees instead of editing existing ones.
    """

    __slots__ = ("root", "nodes", "_parents", "_order", "_indexes")

    def __init__(self, root: int, nodes: dict[int, Node]):
        if root not in nodes:
            raise TreeError(f"root id {root} not among nodes")
        self.root = root
        self.nodes = nodes
        self._parents: Optional[dict[int, int]] = None
        self._order: Optional[tuple[int, ...]] = None
        self._indexes: Optional[dict[int, int]] = None

    def node(self, nid: int) -> Node:
        return self.nodes[nid]

    def tag(self, nid: int) -> str:
        return self.nodes[nid].tag

    def value(self, nid: int) -> Optional[str]:
        return self.nodes[nid].value

    def children(self, nid: int) -> tuple[int, ...]:
        return self.nodes[nid].children

    def is_leaf(self, nid: int) -> bool:
        return not self.nodes[nid].children

    def _walk(self) -> None:
        order: list[int] = []
        parents: dict[int, int] = {}
        stack = [self.root]
        while stack:
            nid = stack.pop()
            order.append(nid)
            kids = self.nodes[nid].children
            for kid in reversed(kids):
                parents[kid] = nid
                stack.append(kid)
        self._order = tuple(order)
        self._parents = parents
        self._indexes = {nid: i for i, nid in enumerate(order)}

    def doc_order(self) -> tuple[int, ...]:
        """All node ids in document (preorder) order."""
        if self._order is None:
            self._walk()
        return self._order  # type: ignore[return-value]

    def doc_index(self, nid: int) -> int:
        if self._indexes is None:
            self._walk()
        return self._indexes[nid]  # type: ignore[index]

    def parent(self, nid: int) -> Optional[int]:
        if self._parents is None:
            self._walk()
        return self._parents.get(nid)  # type: ignore[union-attr]

    def subtree(self, nid: int) -> Iterator[int]:
        """Ids of nid's subtree in document order, nid included."""
        stack = [nid]
        while stack:
            cur = stack.pop()
            yield cur
            for kid in reversed(self.nodes[cur].children):
                stack.append(kid)

    def descendants(self, nid: int) -> Iterator[int]:
        """Proper descendants of nid in document order."""
        it = self.subtree(nid)
        next(it)
        return it

    def size(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"DataTree({to_spec(self)!r})"


# A tree spec is a nested (tag, value, [child specs...]) tuple.
TreeSpec = tuple


def build_tree(spec: TreeSpec) -> DataTree:
    """Build a DataTree from nested (tag, value, [children]) tuples."""
    b = TreeBuilder()

    def rec(s: TreeSpec) -> int:
        if len(s) == 2:
            tag, value = s
            kids: Sequence[TreeSpec] = ()
        else:
            tag, value, kids = s
        nid = b.new_node(tag, value)
        for k in kids:
            b.add_child(nid, rec(k))
        return nid

    return b.build(rec(spec))


def to_spec(tree: DataTree, nid: Optional[int] = None) -> TreeSpec:
    """Inverse of build_tree, useful in tests and repr."""
    nid = tree.root if nid is None else nid
    node = tree.node(nid)
    return (node.tag, node.value, [to_spec(tree, k) for k in node.children])


def deep_copy(tree: DataTree) -> DataTree:
    """Structurally identical copy with entirely fresh node ids."""
    b = TreeBuilder()
    return b.build(b.copy_subtree(tree, tree.root))


def structural_eq(a: DataTree, b: DataTree) -> bool:
    """Equality on shape, tags, values, and child order; ids are ignored."""
    stack = [(a.root, b.root)]
    while stack:
        x, y = stack.pop()
        nx, ny = a.node(x), b.node(y)
        if nx.tag != ny.tag or nx.value != ny.value:
            return False
        if len(nx.children) != len(ny.children):
            return False
        stack.extend(zip(nx.children, ny.children))
    return True


class TreeBuilder:
    """Mutable scratch space for assembling a new DataTree."""

    def __init__(self) -> None:
        self._nodes: dict[int, Node] = {}

    def new_node(self, tag: str, value: Optional[str] = None) -> int:
        if not tag:
            raise TreeError("node tag must be non-empty")
        nid = next_id()
        self._nodes[nid] = Node(nid, tag, value)
        return nid

    def add_child(self, parent: int, child: int) -> None:
        p = self._nodes[parent]
        self._nodes[parent] = Node(p.id, p.tag, p.value, p.children + (child,))

    def copy_subtree(self, src: DataTree, src_id: int) -> int:
        """Deep-copy a subtree of src into this builder, returning the new root id."""
        node = src.node(src_id)
        nid = self.new_node(node.tag, node.value)
        for kid in node.children:
            self.add_child(nid, self.copy_subtree(src, kid))
        return nid

    def build(self, root: int) -> DataTree:
        keep = set()
        stack = [root]
        while stack:
            cur = stack.pop()
            keep.add(cur)
            stack.extend(self._nodes[cur].children)
        return DataTree(root, {nid: self._nodes[nid] for nid in keep})


@dataclass(frozen=True)
class TreeCollection:
    """An ordered collection of trees, the unit all operators consume and produce."""

    trees: tuple[DataTree, ...] = ()

    @staticmethod
    def of(trees: Iterable[DataTree]) -> "TreeCollection":
        return TreeCollection(tuple(trees))

    def __iter__(self) -> Iterator[DataTree]:
        return iter(self.trees)

    def __len__(self) -> int:
        return len(self.trees)

    def __getitem__(self, i: int) -> DataTree:
        return self.trees[i]

    def __add__(self, other: "TreeCollection") -> "TreeCollection":
        return TreeCollection(self.trees + other.trees)

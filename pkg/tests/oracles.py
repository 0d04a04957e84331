"""Independent reference implementations used only by the tests.

The matcher oracle enumerates every injective pid→node tuple outright and
checks all constraints on each — a completely different strategy from the
engine's backtracking search — so agreement between the two is meaningful.
"""

from __future__ import annotations

import itertools
import random
from typing import Optional

from treecube.pattern import (
    ANCHOR_ANYWHERE,
    ANCHOR_ROOT,
    AnyTag,
    AnyValue,
    Axis,
    PatternBuilder,
    PatternTree,
    TagEquals,
    ValueCompare,
    ValueEquals,
    ValueIn,
)
from treecube.tree import DataTree, build_tree


def brute_force_match(pattern: PatternTree, tree: DataTree) -> set[frozenset]:
    """All valid embeddings, found by exhaustive enumeration.

    Returns each embedding as a frozenset of (pid, node-id) pairs.
    """
    pids = list(pattern.preorder())
    nodes = list(tree.doc_order())
    found = set()
    for combo in itertools.permutations(nodes, len(pids)):
        assignment = dict(zip(pids, combo))
        if _satisfies(pattern, tree, assignment):
            found.add(frozenset(assignment.items()))
    return found


def _satisfies(pattern: PatternTree, tree: DataTree, a: dict[int, int]) -> bool:
    if pattern.anchor == ANCHOR_ROOT and a[pattern.root] != tree.root:
        return False
    for pid, node in pattern.nodes.items():
        nid = a[pid]
        if not node.tag.matches(tree.tag(nid)):
            return False
        if not node.value.matches(tree.value(nid)):
            return False
    for pid in pattern.preorder():
        if pid == pattern.root:
            continue
        parent_pid, axis = pattern.parent_of(pid)
        if axis == Axis.CHILD:
            if tree.parent(a[pid]) != a[parent_pid]:
                return False
        else:
            anc = tree.parent(a[pid])
            while anc is not None and anc != a[parent_pid]:
                anc = tree.parent(anc)
            if anc != a[parent_pid]:
                return False
    return True


# --- random instances for matcher sweeps ------------------------------------------

_TAGS = ("a", "b", "c", "d")
_VALUES = (None, "1", "2", "x")


def random_tree(rng: random.Random, max_nodes: int = 9) -> DataTree:
    count = rng.randint(1, max_nodes)

    def grow(budget: list[int]):
        tag = rng.choice(_TAGS)
        value = rng.choice(_VALUES)
        kids = []
        while budget[0] > 0 and rng.random() < 0.6:
            budget[0] -= 1
            kids.append(grow(budget))
        return (tag, value, kids)

    budget = [count - 1]
    return build_tree(grow(budget))


def random_pattern(rng: random.Random, max_pids: int = 4) -> PatternTree:
    count = rng.randint(1, max_pids)
    pb = PatternBuilder()
    pids = []
    for i in range(count):
        tag = rng.choice(_TAGS) if rng.random() < 0.7 else None
        kwargs = {}
        r = rng.random()
        if r < 0.25:
            kwargs["value_eq"] = rng.choice(("1", "2", "x"))
        elif r < 0.35:
            kwargs["value_in"] = (rng.choice(("1", "2")), "x")
        if i == 0:
            pids.append(pb.add(tag, **kwargs))
        else:
            parent = rng.choice(pids)
            axis = Axis.DESCENDANT if rng.random() < 0.35 else Axis.CHILD
            pids.append(pb.add(tag, parent=parent, axis=axis, **kwargs))
    anchor = ANCHOR_ANYWHERE if rng.random() < 0.5 else ANCHOR_ROOT
    return pb.build(anchor=anchor)

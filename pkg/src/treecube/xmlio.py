"""Canonical XML for fact documents, hierarchy documents, and result trees.

Canonical form: UTF-8, 2-space indent, children in tree order, one element
per line, a newline at end of file, and no attributes — except num, which
identifies hierarchy members and maps to a leading "num" child leaf in the
tree model.  Serialization is deterministic, so equal trees yield byte-equal
documents.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Union
from xml.sax.saxutils import escape, quoteattr

from .model import (
    CubeSchema,
    CubeValidationError,
    HierarchyTree,
    TreeCube,
    hierarchy_from_tree,
    validate,
)
from .tree import DataTree, TreeBuilder, TreeCollection


class XmlFormatError(ValueError):
    """Raised on malformed or non-canonical input documents."""


# --- parsing --------------------------------------------------------------------

def parse_tree(text: str) -> DataTree:
    """Any canonical XML document as a tree; num attributes become child leaves."""
    try:
        elem = ET.fromstring(text)
    except ET.ParseError as e:
        raise XmlFormatError(f"XML parse error: {e}") from None
    b = TreeBuilder()

    def convert(el: ET.Element) -> int:
        for name in el.attrib:
            if name != "num":
                raise XmlFormatError(
                    f"attribute {name!r} on <{el.tag}> not allowed in canonical form"
                )
        value = el.text.strip() if el.text and el.text.strip() else None
        nid = b.new_node(el.tag, value)
        if "num" in el.attrib:
            b.add_child(nid, b.new_node("num", el.attrib["num"]))
        for child in el:
            if child.tail and child.tail.strip():
                raise XmlFormatError(
                    f"stray text {child.tail.strip()!r} after <{child.tag}>"
                )
            b.add_child(nid, convert(child))
        return nid

    return b.build(convert(elem))


def parse_facts(text: str) -> TreeCube:
    """A fact document as a cube; infers the schema from the first fact.

    The document root is the collection; its children are facts; the first
    fact's child tags give the dimension order, the last child the measure.
    Raises CubeValidationError when any fact breaks that shape.
    """
    doc = parse_tree(text)
    facts = doc.children(doc.root)
    if not facts:
        raise XmlFormatError("cannot infer schema: collection has no facts")
    first = facts[0]
    tags = [doc.tag(k) for k in doc.children(first)]
    if len(tags) < 2:
        raise XmlFormatError(
            "cannot infer schema: first fact needs at least one dimension "
            "and a measure"
        )
    schema = CubeSchema(
        fact_tag=doc.tag(first),
        collection_tag=doc.tag(doc.root),
        dimensions=tuple(tags[:-1]),
        measure=tags[-1],
    )
    cube = TreeCube(schema, TreeCollection.of([doc]))
    issues = validate(cube)
    if issues:
        raise CubeValidationError(issues)
    return cube


def parse_hierarchy(text: str) -> HierarchyTree:
    """A hierarchy document: root tag = hierarchy name, levels nested coarse over fine."""
    return hierarchy_from_tree(parse_tree(text))


# --- serialization ---------------------------------------------------------------

def serialize_tree(tree: DataTree) -> str:
    """Canonical document text for one tree, newline-terminated."""
    lines: list[str] = []

    def emit(nid: int, indent: int) -> None:
        node = tree.node(nid)
        kids = list(node.children)
        attr = ""
        if kids and tree.tag(kids[0]) == "num" and not tree.children(kids[0]):
            attr = f" num={quoteattr(tree.value(kids[0]) or '')}"
            kids = kids[1:]
        pad = "  " * indent
        if not kids and node.value is None:
            lines.append(f"{pad}<{node.tag}{attr}/>")
        elif not kids:
            lines.append(
                f"{pad}<{node.tag}{attr}>{escape(node.value)}</{node.tag}>"
            )
        else:
            head = f"{pad}<{node.tag}{attr}>"
            if node.value is not None:
                head += escape(node.value)
            lines.append(head)
            for kid in kids:
                emit(kid, indent + 1)
            lines.append(f"{pad}</{node.tag}>")

    emit(tree.root, 0)
    return "\n".join(lines) + "\n"


def serialize_cube(cube: TreeCube) -> str:
    """The cube as one rooted document; loose facts get the collection root."""
    if cube.is_rooted:
        return serialize_tree(cube.data[0])
    b = TreeBuilder()
    root = b.new_node(cube.schema.collection_tag)
    for fact in cube.fact_trees():
        b.add_child(root, b.copy_subtree(fact, fact.root))
    return serialize_tree(b.build(root))


def serialize(obj: Union[DataTree, TreeCube, HierarchyTree]) -> str:
    if isinstance(obj, TreeCube):
        return serialize_cube(obj)
    if isinstance(obj, HierarchyTree):
        if obj.tree is None:
            raise XmlFormatError("hierarchy has no document tree to serialize")
        return serialize_tree(obj.tree)
    if isinstance(obj, DataTree):
        return serialize_tree(obj)
    raise XmlFormatError(f"cannot serialize {type(obj).__name__}")

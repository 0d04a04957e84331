"""Cube schema, validation codes, cell views, hierarchies."""

import pytest

from treecube.model import (
    BAD_FACT_TAG,
    MEASURE_NOT_LAST,
    MISSING_DIMENSION,
    NON_NUMERIC_MEASURE,
    OUT_OF_ORDER,
    CubeCellView,
    CubeSchema,
    CubeValidationError,
    HierarchySet,
    ModelError,
    TreeCube,
    from_cells,
    hierarchy_from_tree,
    lookup_level,
    to_cells,
    validate,
)
from treecube.tree import TreeCollection, build_tree

SCHEMA = CubeSchema(
    fact_tag="sale",
    collection_tag="sales",
    dimensions=("city", "product", "year"),
    measure="amount",
)


def make_fact(*pairs):
    return build_tree(("sale", None, [(t, v, []) for t, v in pairs]))


def plain_cube(*facts):
    return TreeCube(SCHEMA, TreeCollection.of(list(facts)), HierarchySet())


def good_fact():
    return make_fact(
        ("city", "Lyon"), ("product", "Keyboard"), ("year", "2006"), ("amount", "10")
    )


# --- schema -------------------------------------------------------------------------

def test_schema_requires_dimensions():
    with pytest.raises(ModelError):
        CubeSchema("sale", "sales", (), "amount")


def test_schema_rejects_duplicate_dimensions():
    with pytest.raises(ModelError):
        CubeSchema("sale", "sales", ("city", "city"), "amount")


def test_schema_permutation_and_level_moves():
    s2 = SCHEMA.with_dimensions(("year", "city", "product"))
    assert s2.dimensions == ("year", "city", "product")
    with pytest.raises(ModelError):
        SCHEMA.with_dimensions(("year", "city"))
    s3 = SCHEMA.with_level("city", "department")
    assert s3.dimensions == ("department", "product", "year")
    assert s3.base_of("department") == "city"
    s4 = s3.with_level("department", "city")
    assert s4.dimensions == SCHEMA.dimensions


def test_schema_push_pull_bookkeeping():
    s2 = SCHEMA.with_pushed("city")
    assert s2.pushed == ("city",)
    s3 = s2.with_pushed("year")
    assert s3.pushed == ("city", "year")
    assert s3.with_pulled().pushed == ()
    with pytest.raises(ModelError):
        SCHEMA.with_pushed("planet")


# --- validation ---------------------------------------------------------------------

def test_validate_clean_cube():
    assert validate(plain_cube(good_fact())) == []


def test_validate_bad_fact_tag():
    bad = build_tree(("sail", None, [("city", "Lyon", []), ("amount", "1", [])]))
    issues = validate(plain_cube(good_fact(), bad))
    assert [i.code for i in issues] == [BAD_FACT_TAG]
    assert issues[0].fact_index == 1


def test_validate_missing_dimension():
    bad = make_fact(("city", "Lyon"), ("year", "2006"), ("amount", "1"))
    issues = validate(plain_cube(bad))
    assert [i.code for i in issues] == [MISSING_DIMENSION]


def test_validate_missing_measure_reports_missing_dimension():
    bad = make_fact(("city", "Lyon"), ("product", "K"), ("year", "2006"))
    issues = validate(plain_cube(bad))
    assert [i.code for i in issues] == [MISSING_DIMENSION]


def test_validate_out_of_order():
    bad = make_fact(
        ("product", "K"), ("city", "Lyon"), ("year", "2006"), ("amount", "1")
    )
    issues = validate(plain_cube(bad))
    assert [i.code for i in issues] == [OUT_OF_ORDER]


def test_validate_non_numeric_measure():
    bad = make_fact(
        ("city", "L"), ("product", "K"), ("year", "2006"), ("amount", "ten")
    )
    issues = validate(plain_cube(bad))
    assert [i.code for i in issues] == [NON_NUMERIC_MEASURE]


def test_validate_measure_not_last():
    bad = make_fact(
        ("city", "L"), ("product", "K"), ("amount", "1"), ("year", "2006")
    )
    issues = validate(plain_cube(bad))
    assert MEASURE_NOT_LAST in [i.code for i in issues]


def test_validate_pushed_shape():
    pushed_schema = SCHEMA.with_pushed("city")
    fact = build_tree(
        (
            "sale",
            None,
            [
                ("city", "Lyon", []),
                ("product", "K", []),
                ("year", "2006", []),
                ("amount", "10", [("city", "Lyon", [])]),
            ],
        )
    )
    cube = TreeCube(pushed_schema, TreeCollection.of([fact]), HierarchySet())
    assert validate(cube) == []
    plain = TreeCube(pushed_schema, TreeCollection.of([good_fact()]), HierarchySet())
    assert validate(plain) != []


def test_validate_never_raises_and_indexes_facts():
    bad1 = build_tree(("sail", None, [("amount", "1", [])]))
    bad2 = make_fact(("city", "L"), ("product", "K"), ("year", "2"), ("amount", "x"))
    issues = validate(plain_cube(good_fact(), bad1, bad2))
    assert {i.fact_index for i in issues} == {1, 2}


# --- cells --------------------------------------------------------------------------

def test_to_cells_and_from_cells_round_trip():
    cube = plain_cube(good_fact())
    cells = to_cells(cube)
    assert cells == [
        CubeCellView({"city": "Lyon", "product": "Keyboard", "year": "2006"}, "10")
    ]
    again = from_cells(SCHEMA, cells)
    assert to_cells(again) == cells


def test_to_cells_requires_valid_cube():
    bad = make_fact(("city", "L"), ("amount", "1"))
    with pytest.raises(CubeValidationError):
        to_cells(plain_cube(bad))


def test_cell_key_is_coordinate_set():
    c = CubeCellView({"city": "L"}, "1")
    assert c.key() == frozenset({("city", "L")})


# --- hierarchies --------------------------------------------------------------------

GEO_SPEC = (
    "geography",
    None,
    [
        (
            "department",
            None,
            [
                ("num", "69", []),
                ("city", "Lyon", []),
                ("city", "Villeurbanne", []),
            ],
        ),
        ("department", None, [("num", "75", []), ("city", "Paris", [])]),
    ],
)


def test_hierarchy_from_tree_reads_levels_and_paths():
    h = hierarchy_from_tree(build_tree(GEO_SPEC))
    assert h.name == "geography"
    assert h.levels == ("department", "city")
    assert h.dimension == "city"
    assert sorted(h.members()) == ["Lyon", "Paris", "Villeurbanne"]


def test_lookup_level_finds_numbered_ancestor():
    h = hierarchy_from_tree(build_tree(GEO_SPEC))
    hit = lookup_level(h, "Lyon", "department")
    assert hit.value == "69"
    assert hit.attributes == {"num": "69"}
    assert lookup_level(h, "Paris", "department").value == "75"
    assert lookup_level(h, "Lyon", "city").value == "Lyon"


def test_lookup_level_rejects_unknowns():
    h = hierarchy_from_tree(build_tree(GEO_SPEC))
    with pytest.raises(ModelError):
        lookup_level(h, "Lyon", "region")
    with pytest.raises(ModelError):
        lookup_level(h, "Oslo", "department")


def test_hierarchy_coarser_and_members_under():
    h = hierarchy_from_tree(build_tree(GEO_SPEC))
    assert h.is_coarser("department", "city")
    assert not h.is_coarser("city", "department")
    assert sorted(h.members_under("department", "69")) == ["Lyon", "Villeurbanne"]


def test_non_strict_hierarchy_rejected():
    dup = (
        "geo",
        None,
        [
            ("department", None, [("num", "1", []), ("city", "Lyon", [])]),
            ("department", None, [("num", "2", []), ("city", "Lyon", [])]),
        ],
    )
    with pytest.raises(ModelError, match="non-strict"):
        hierarchy_from_tree(build_tree(dup))


def test_mixed_depth_levels_rejected():
    ragged = (
        "geo",
        None,
        [
            ("department", None, [("city", "Lyon", [])]),
            ("city", "Paris", []),
        ],
    )
    with pytest.raises(ModelError):
        hierarchy_from_tree(build_tree(ragged))


def test_record_tree_shape():
    h = hierarchy_from_tree(build_tree(GEO_SPEC))
    rt = h.record_tree()
    assert rt.tag(rt.root) == "records"
    entries = rt.children(rt.root)
    assert len(entries) == 3
    first = entries[0]
    assert [rt.tag(k) for k in rt.children(first)] == ["department", "city"]
    assert [rt.value(k) for k in rt.children(first)] == ["69", "Lyon"]


def test_hierarchy_set_resolution():
    h = hierarchy_from_tree(build_tree(GEO_SPEC))
    hs = HierarchySet().add(h)
    assert hs.for_dimension("city") is h
    assert hs.for_dimension("department") is h
    assert hs.get("year") is None
    with pytest.raises(ModelError):
        hs.for_dimension("year")

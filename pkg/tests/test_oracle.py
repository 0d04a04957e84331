"""The relational reference: its own behavior, plus formatter cross-checks."""

import random
from fractions import Fraction

import pytest

from treecube.algebra import render_number
from treecube.oracle import (
    FactTable,
    FactTuple,
    OracleError,
    compare,
    flatten,
    hierarchy_mappings,
    oracle_apply,
    oracle_cube,
    render_value,
)

T = FactTable(
    ("city", "year"),
    "amount",
    (
        FactTuple({"city": "L", "year": "2006"}, "10"),
        FactTuple({"city": "P", "year": "2006"}, "3"),
        FactTuple({"city": "L", "year": "2007"}, "4"),
    ),
)

MAPS = {"country": {"L": "FR", "P": "FR"}, "city": {"L": "L", "P": "P"}}


def test_flatten_reads_facts_in_order(sales_cube):
    table = flatten(sales_cube)
    assert table.dimensions == ("city", "product", "year")
    assert table.measure == "amount"
    assert [r.measure for r in table.rows] == ["10", "5", "7", "3", "4"]
    assert table.rows[0].coordinates["city"] == "Lyon"


def test_hierarchy_mappings(geo_hierarchy):
    maps = hierarchy_mappings(geo_hierarchy)
    assert maps["department"]["Lyon"] == "69"
    assert maps["department"]["Paris"] == "75"
    assert maps["city"]["Lyon"] == "Lyon"


def test_oracle_rotate_keeps_rows():
    out = oracle_apply(T, "rotate", perm=("year", "city"))
    assert out.dimensions == ("year", "city")
    assert out.rows == T.rows
    with pytest.raises(OracleError):
        oracle_apply(T, "rotate", perm=("year",))


def test_oracle_switch_reverses_runs():
    table = FactTable(
        ("c",),
        "m",
        tuple(FactTuple({"c": c}, str(i)) for i, c in enumerate("aabba")),
    )
    out = oracle_apply(table, "switch", dimension="c", members=("a", "b"))
    assert [r.coordinates["c"] for r in out.rows] == list("abbaa")
    assert [r.measure for r in out.rows] == ["4", "2", "3", "0", "1"]
    again = oracle_apply(out, "switch", dimension="c", members=("a", "b"))
    assert again.rows == table.rows


def test_oracle_pull_moves_measure_into_coordinates():
    out = oracle_apply(T, "pull")
    assert out.dimensions == ("amount", "city", "year")
    assert out.measure is None
    assert out.rows[0].coordinates == {"amount": "10", "city": "L", "year": "2006"}


def test_oracle_slice_and_dice_filter():
    out = oracle_apply(T, "slice", dimension="city", members=("L",))
    assert len(out.rows) == 2
    out = oracle_apply(T, "dice", where={"city": ["L"], "year": ["2007"]})
    assert len(out.rows) == 1
    assert out.rows[0].measure == "4"


def test_oracle_rollup_groups_and_aggregates():
    out = oracle_apply(
        T, "rollup", dimension="city", level="country", agg="sum", mappings=MAPS
    )
    assert out.dimensions == ("country", "year")
    assert [(r.coordinates["year"], r.measure) for r in out.rows] == [
        ("2006", "13"),
        ("2007", "4"),
    ]


def test_oracle_rollup_drops_unmapped_members():
    maps = {"country": {"L": "FR"}}
    out = oracle_apply(
        T, "rollup", dimension="city", level="country", agg="sum", mappings=maps
    )
    assert [r.measure for r in out.rows] == ["10", "4"]


def test_oracle_drilldown_restores_base():
    rolled = oracle_apply(
        T, "rollup", dimension="city", level="country", agg="sum", mappings=MAPS
    )
    down = oracle_apply(
        rolled,
        "drilldown",
        dimension="country",
        level="city",
        agg="sum",
        mappings=MAPS,
        base=T,
    )
    assert sorted((r.key(), r.measure) for r in down.rows) == sorted(
        (r.key(), r.measure) for r in T.rows
    )


def test_oracle_cube_powerset():
    out = oracle_cube(T, "sum")
    assert set(out) == {"city,year", "city", "year", None}
    apex = out[None]
    assert apex.rows[0].coordinates == {"city": "ALL", "year": "ALL"}
    assert apex.rows[0].measure == "17"


def test_compare_modes():
    a = FactTable(("c",), "m", (FactTuple({"c": "x"}, "1"), FactTuple({"c": "y"}, "2")))
    b = FactTable(("c",), "m", (FactTuple({"c": "y"}, "2"), FactTuple({"c": "x"}, "1")))
    assert not compare(a, b, "ordered").ok
    assert compare(a, b, "multiset").ok
    c = FactTable(("c",), "m", (FactTuple({"c": "x"}, "1"),))
    rep = compare(a, c, "multiset")
    assert not rep.ok
    assert any("missing" in d for d in rep.differences)


def test_compare_reports_schema_mismatch():
    a = FactTable(("c",), "m", ())
    b = FactTable(("d",), "m", ())
    assert not compare(a, b, "ordered").ok


# --- formatter cross-check -----------------------------------------------------------

def test_render_value_exact_cases():
    assert render_value(Fraction(0)) == "0"
    assert render_value(Fraction(17)) == "17"
    assert render_value(Fraction(5, 2)) == "2.5"
    assert render_value(Fraction(-1, 8)) == "-0.125"
    assert render_value(Fraction(1, 3)) == "0.333333333333"
    assert render_value(Fraction(2, 3)) == "0.666666666667"


def test_two_formatters_agree_on_random_fractions():
    rng = random.Random(1234)
    for _ in range(3000):
        num = rng.randint(-10**9, 10**9)
        den = rng.randint(1, 10**6)
        x = Fraction(num, den)
        assert render_value(x) == render_number(x), x


def test_two_formatters_agree_on_aggregation_like_values():
    rng = random.Random(99)
    for _ in range(500):
        parts = [Fraction(rng.randint(0, 999)) for _ in range(rng.randint(1, 50))]
        total = sum(parts, Fraction(0))
        avg = total / len(parts)
        for x in (total, avg):
            assert render_value(x) == render_number(x), x

"""Relational reference implementation for checking the tree engine.

Facts are replayed as plain coordinate/measure tuples and every cube
operation is recomputed by direct enumeration — no trees, no patterns, no
indexes — then compared against the engine's flattened output.  The only
engine types this module touches are the cube's public accessors (to read
facts in) and hierarchy paths (plain data); all computation here is
dict-and-list work, including an independent copy of the canonical number
rendering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import TYPE_CHECKING, Mapping, Optional, Sequence

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .model import HierarchyTree, TreeCube


class OracleError(ValueError):
    """Raised when an oracle request doesn't fit the table."""


# --- independent number handling ---------------------------------------------------

def _parse(text: Optional[str]) -> Optional[Fraction]:
    if text is None:
        return None
    try:
        d = Decimal(text)
    except InvalidOperation:
        return None
    if not d.is_finite():
        return None
    return Fraction(d)


def _round_sig(num: int, den: int, sig: int) -> tuple[int, int]:
    """Half-even rounding of num/den (both > 0) to sig significant digits.

    Returns (mantissa, exponent) with value ≈ mantissa * 10**exponent and
    mantissa having exactly sig digits.
    """
    e = len(str(num)) - len(str(den))
    if num * 10 ** max(0, -e) < den * 10 ** max(0, e):
        e -= 1
    shift = sig - 1 - e
    if shift >= 0:
        scaled_num, scaled_den = num * 10**shift, den
    else:
        scaled_num, scaled_den = num, den * 10**-shift
    q, r = divmod(scaled_num, scaled_den)
    twice = 2 * r
    if twice > scaled_den or (twice == scaled_den and q % 2 == 1):
        q += 1
    if len(str(q)) > sig:
        q //= 10
        e += 1
    return q, e - (sig - 1)


def _digits_to_text(mantissa: int, exponent: int, negative: bool) -> str:
    s = str(mantissa)
    if exponent >= 0:
        text = s + "0" * exponent
    else:
        point = len(s) + exponent
        if point <= 0:
            s = "0" * (1 - point) + s
            point = 1
        frac = s[point:].rstrip("0")
        text = s[:point] + ("." + frac if frac else "")
    if text in ("", "0"):
        return "0"
    return ("-" if negative else "") + text


def render_value(x: Fraction) -> str:
    """Canonical decimal text, computed with integer arithmetic only."""
    if x == 0:
        return "0"
    negative = x < 0
    num, den = abs(x.numerator), x.denominator
    if den == 1:
        return ("-" if negative else "") + str(num)
    stripped = den
    shift2 = shift5 = 0
    while stripped % 2 == 0:
        stripped //= 2
        shift2 += 1
    while stripped % 5 == 0:
        stripped //= 5
        shift5 += 1
    if stripped == 1:
        shift = max(shift2, shift5)
        mantissa = num * (10**shift // den)
        return _digits_to_text(mantissa, -shift, negative)
    mantissa, exponent = _round_sig(num, den, 12)
    mantissa_s = str(mantissa).rstrip("0") or "0"
    dropped = len(str(mantissa)) - len(mantissa_s)
    return _digits_to_text(int(mantissa_s), exponent + dropped, negative)


def _combine(kind: str, values: Sequence[Optional[str]]) -> str:
    if kind == "count":
        return str(len(values))
    numbers = []
    for v in values:
        f = _parse(v)
        if f is None:
            raise OracleError(f"non-numeric measure {v!r}")
        numbers.append(f)
    if kind == "sum":
        return render_value(sum(numbers, Fraction(0)))
    if kind == "avg":
        return render_value(sum(numbers, Fraction(0)) / len(numbers))
    if kind == "min":
        return render_value(min(numbers))
    if kind == "max":
        return render_value(max(numbers))
    raise OracleError(f"unknown aggregation {kind!r}")


# --- tables -------------------------------------------------------------------------

@dataclass(frozen=True)
class FactTuple:
    coordinates: dict[str, str]
    measure: Optional[str]

    def key(self) -> frozenset:
        return frozenset(self.coordinates.items())


@dataclass(frozen=True)
class FactTable:
    dimensions: tuple[str, ...]
    measure: Optional[str]
    rows: tuple[FactTuple, ...]

    def with_rows(self, rows: Sequence[FactTuple]) -> "FactTable":
        return FactTable(self.dimensions, self.measure, tuple(rows))


def flatten(cube: "TreeCube") -> FactTable:
    """Read the cube's facts into tuples, preserving order.

    Walks the fact trees through their public accessors only; pushed member
    copies under the measure are ignored (they duplicate coordinates).
    """
    schema = cube.schema
    dims = set(schema.dimensions)
    rows = []
    for fact in cube.fact_trees():
        coords: dict[str, str] = {}
        measure: Optional[str] = None
        for kid in fact.children(fact.root):
            tag = fact.tag(kid)
            if tag in dims and tag not in coords:
                coords[tag] = fact.value(kid) or ""
            elif tag == schema.measure and measure is None:
                measure = fact.value(kid)
        rows.append(FactTuple(coords, measure))
    return FactTable(schema.dimensions, schema.measure, tuple(rows))


def hierarchy_mappings(h: "HierarchyTree") -> dict[str, dict[str, str]]:
    """Per-level member→ancestor-value maps, read off the hierarchy paths."""
    out: dict[str, dict[str, str]] = {level: {} for level in h.levels}
    for member, path in h.paths.items():
        for part in path:
            out[part.level][member] = part.value
    return out


# --- the relational replay -----------------------------------------------------------

def _require_measure(table: FactTable, op: str) -> str:
    if table.measure is None:
        raise OracleError(f"{op} needs a measure")
    return table.measure


def _slot_rename(dims: tuple[str, ...], old: str, new: str) -> tuple[str, ...]:
    return tuple(new if d == old else d for d in dims)


def oracle_rotate(table: FactTable, perm: Sequence[str]) -> FactTable:
    if sorted(perm) != sorted(table.dimensions):
        raise OracleError(f"{tuple(perm)} is not a permutation of {table.dimensions}")
    return FactTable(tuple(perm), table.measure, table.rows)


def oracle_switch(table: FactTable, dimension: str, a: str, b: str) -> FactTable:
    if dimension not in table.dimensions:
        raise OracleError(f"unknown dimension {dimension!r}")
    targets = {a, b}
    positions = [
        i for i, r in enumerate(table.rows) if r.coordinates.get(dimension) in targets
    ]
    runs: list[list[int]] = []
    for p in positions:
        v = table.rows[p].coordinates[dimension]
        if runs and table.rows[runs[-1][-1]].coordinates[dimension] == v:
            runs[-1].append(p)
        else:
            runs.append([p])
    occupants: list[int] = []
    for run in reversed(runs):
        occupants.extend(run)
    new_rows = list(table.rows)
    for slot, src in zip(positions, occupants):
        new_rows[slot] = table.rows[src]
    return table.with_rows(new_rows)


def oracle_push(table: FactTable, dimension: str) -> FactTable:
    if dimension not in table.dimensions:
        raise OracleError(f"unknown dimension {dimension!r}")
    return table


def oracle_pull(table: FactTable) -> FactTable:
    m = _require_measure(table, "pull")
    rows = tuple(
        FactTuple({**r.coordinates, m: r.measure or ""}, None) for r in table.rows
    )
    return FactTable((m,) + table.dimensions, None, rows)


def oracle_slice(table: FactTable, dimension: str, members: Sequence[str]) -> FactTable:
    if dimension not in table.dimensions:
        raise OracleError(f"unknown dimension {dimension!r}")
    wanted = set(members)
    return table.with_rows(
        [r for r in table.rows if r.coordinates.get(dimension) in wanted]
    )


def oracle_dice(table: FactTable, where: Mapping[str, Sequence[str]]) -> FactTable:
    for d in where:
        if d not in table.dimensions:
            raise OracleError(f"unknown dimension {d!r}")
    sets = {d: set(vs) for d, vs in where.items()}
    return table.with_rows(
        [
            r
            for r in table.rows
            if all(r.coordinates.get(d) in s for d, s in sets.items())
        ]
    )


def _group_aggregate(
    rows: Sequence[FactTuple],
    key_of,
    agg: str,
) -> list[tuple[tuple, str]]:
    """Group rows by key in first-encounter order and combine measures."""
    order: list[tuple] = []
    buckets: dict[tuple, list[Optional[str]]] = {}
    for r in rows:
        k = key_of(r)
        if k not in buckets:
            buckets[k] = []
            order.append(k)
        buckets[k].append(r.measure)
    return [(k, _combine(agg, buckets[k])) for k in order]


def oracle_rollup(
    table: FactTable,
    dimension: str,
    level: str,
    agg: str,
    mappings: Mapping[str, Mapping[str, str]],
) -> FactTable:
    if dimension not in table.dimensions:
        raise OracleError(f"unknown dimension {dimension!r}")
    _require_measure(table, "roll-up")
    ancestors = mappings[level]
    kept = [r for r in table.rows if r.coordinates.get(dimension) in ancestors]
    others = [d for d in table.dimensions if d != dimension]

    def key_of(r: FactTuple) -> tuple:
        return (ancestors[r.coordinates[dimension]],) + tuple(
            r.coordinates[d] for d in others
        )

    dims2 = _slot_rename(table.dimensions, dimension, level)
    rows = []
    for key, value in _group_aggregate(kept, key_of, agg):
        coords = {level: key[0]}
        for d, v in zip(others, key[1:]):
            coords[d] = v
        rows.append(FactTuple({d: coords[d] for d in dims2}, value))
    return FactTable(dims2, table.measure, tuple(rows))


def oracle_drilldown(
    table: FactTable,
    base: FactTable,
    dimension: str,
    level: str,
    agg: str,
    mappings: Mapping[str, Mapping[str, str]],
) -> FactTable:
    if dimension not in table.dimensions:
        raise OracleError(f"unknown dimension {dimension!r}")
    _require_measure(table, "drill-down")
    slot = table.dimensions.index(dimension)
    base_dim = base.dimensions[slot]
    others = [d for d in table.dimensions if d != dimension]
    coarse_of = mappings[dimension]
    target_of = None if level == base_dim else mappings[level]

    present = {r.key() for r in table.rows}
    survivors = []
    for r in base.rows:
        member = r.coordinates.get(base_dim)
        coarse = coarse_of.get(member or "")
        if coarse is None:
            continue
        coarse_coords = dict(r.coordinates)
        del coarse_coords[base_dim]
        coarse_coords[dimension] = coarse
        if frozenset(coarse_coords.items()) not in present:
            continue
        survivors.append(r)

    def key_of(r: FactTuple) -> tuple:
        member = r.coordinates[base_dim]
        fine = member if target_of is None else target_of[member]
        return (fine,) + tuple(r.coordinates[d] for d in others)

    dims2 = _slot_rename(table.dimensions, dimension, level)
    rows = []
    for key, value in _group_aggregate(survivors, key_of, agg):
        coords = {level: key[0]}
        for d, v in zip(others, key[1:]):
            coords[d] = v
        rows.append(FactTuple({d: coords[d] for d in dims2}, value))
    return FactTable(dims2, table.measure, tuple(rows))


ALL_MARKER = "ALL"


def oracle_cube(
    table: FactTable,
    agg: str,
    rollups: Sequence[tuple[str, str, Mapping[str, Mapping[str, str]]]] = (),
) -> dict[Optional[str], FactTable]:
    """Powerset of group-bys after the given (dimension, level, mappings) rollups.

    Keys are comma-joined kept-dimension labels in reading order, or None
    for the apex; masked coordinates carry the ALL marker.
    """
    _require_measure(table, "cube")
    work = table
    for dimension, level, mappings in rollups:
        work = oracle_rollup(work, dimension, level, agg, mappings)
    dims = work.dimensions
    out: dict[Optional[str], FactTable] = {}
    for mask in range(len(dims), -1, -1):
        for kept in _combinations(dims, mask):
            kept_set = set(kept)

            def key_of(r: FactTuple, _kept=tuple(kept)) -> tuple:
                return tuple(r.coordinates[d] for d in _kept)

            rows = []
            for key, value in _group_aggregate(work.rows, key_of, agg):
                coords = {
                    d: (key[kept.index(d)] if d in kept_set else ALL_MARKER)
                    for d in dims
                }
                rows.append(FactTuple(coords, value))
            label = ",".join(kept) if kept else None
            out[label] = FactTable(dims, work.measure, tuple(rows))
    return out


def _combinations(items: Sequence[str], size: int) -> list[list[str]]:
    if size == 0:
        return [[]]
    if size > len(items):
        return []
    head, rest = items[0], items[1:]
    with_head = [[head] + c for c in _combinations(rest, size - 1)]
    return with_head + _combinations(rest, size)


# --- dispatch -----------------------------------------------------------------------

MODE_FOR_OP = {
    "rotate": "ordered",
    "switch": "ordered",
    "push": "ordered",
    "pull": "ordered",
    "slice": "multiset",
    "dice": "multiset",
    "rollup": "multiset",
    "drilldown": "multiset",
    "cube": "multiset",
}


def oracle_apply(
    table: FactTable,
    op: str,
    *,
    dimension: Optional[str] = None,
    level: Optional[str] = None,
    agg: Optional[str] = None,
    perm: Sequence[str] = (),
    members: Sequence[str] = (),
    where: Optional[Mapping[str, Sequence[str]]] = None,
    mappings: Optional[Mapping[str, Mapping[str, str]]] = None,
    base: Optional[FactTable] = None,
):
    """Replay one operation relationally; cube returns a per-cuboid dict."""
    if op == "rotate":
        return oracle_rotate(table, perm)
    if op == "switch":
        if len(members) != 2:
            raise OracleError("switch needs exactly two members")
        assert dimension is not None
        return oracle_switch(table, dimension, members[0], members[1])
    if op == "push":
        assert dimension is not None
        return oracle_push(table, dimension)
    if op == "pull":
        return oracle_pull(table)
    if op == "slice":
        assert dimension is not None
        return oracle_slice(table, dimension, members)
    if op == "dice":
        return oracle_dice(table, where or {})
    if op == "rollup":
        assert dimension is not None and level is not None and agg is not None
        return oracle_rollup(table, dimension, level, agg, mappings or {})
    if op == "drilldown":
        assert dimension is not None and level is not None and agg is not None
        if base is None:
            raise OracleError("drill-down needs the base table")
        return oracle_drilldown(table, base, dimension, level, agg, mappings or {})
    if op == "cube":
        raise OracleError("use oracle_cube for the lattice result")
    raise OracleError(f"unknown operation {op!r}")


# --- comparison ---------------------------------------------------------------------

@dataclass
class CompareReport:
    differences: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.differences

    def __str__(self) -> str:
        return "match" if self.ok else "; ".join(self.differences)


def _row_repr(r: FactTuple) -> str:
    coords = ", ".join(f"{k}={v}" for k, v in sorted(r.coordinates.items()))
    return f"({coords}) -> {r.measure}"


def compare(a: FactTable, b: FactTable, mode: str) -> CompareReport:
    """Diff two tables; mode "ordered" compares row order too, "multiset" only content."""
    report = CompareReport()
    if a.dimensions != b.dimensions:
        report.differences.append(
            f"dimension mismatch: {a.dimensions} vs {b.dimensions}"
        )
        return report
    if a.measure != b.measure:
        report.differences.append(f"measure mismatch: {a.measure} vs {b.measure}")
        return report
    if mode == "ordered":
        if len(a.rows) != len(b.rows):
            report.differences.append(
                f"row count {len(a.rows)} vs {len(b.rows)}"
            )
        for i, (x, y) in enumerate(zip(a.rows, b.rows)):
            if x.coordinates != y.coordinates or x.measure != y.measure:
                report.differences.append(
                    f"row {i}: {_row_repr(x)} vs {_row_repr(y)}"
                )
        return report
    if mode != "multiset":
        raise OracleError(f"unknown compare mode {mode!r}")

    def counted(rows: Sequence[FactTuple]) -> dict:
        counts: dict = {}
        for r in rows:
            k = (r.key(), r.measure)
            counts[k] = counts.get(k, 0) + 1
        return counts

    ca, cb = counted(a.rows), counted(b.rows)
    for k in ca:
        if ca[k] > cb.get(k, 0):
            coords, measure = k
            detail = ", ".join(f"{d}={v}" for d, v in sorted(coords))
            report.differences.append(
                f"missing in right ({ca[k] - cb.get(k, 0)}x): ({detail}) -> {measure}"
            )
    for k in cb:
        if cb[k] > ca.get(k, 0):
            coords, measure = k
            detail = ", ".join(f"{d}={v}" for d, v in sorted(coords))
            report.differences.append(
                f"extra in right ({cb[k] - ca.get(k, 0)}x): ({detail}) -> {measure}"
            )
    return report

/** Pure pivot-grid construction: lay server cells out by row/column dimensions.
 *
 * Pivoting is a display transposition only. It never aggregates: every entry
 * in the body is a verbatim value from the server's cell list, and cells that
 * share a (row, column) position because ungrouped dimensions differ are
 * stacked in server order, not combined.
 */

import type { Cell } from "./types.js";

export interface PivotLayout {
  rows: string[];
  cols: string[];
}

export interface PivotModel {
  rowDims: string[];
  colDims: string[];
  rowKeys: string[][];
  colKeys: string[][];
  /** body[r][c]: stacked display entries; "—" stands for a missing measure. */
  body: string[][][];
  empty: boolean;
}

export const NO_MEASURE = "—";

export function defaultLayout(dimensions: string[]): PivotLayout {
  return {
    rows: dimensions.length > 0 ? [dimensions[0]!] : [],
    cols: dimensions.length > 1 ? [dimensions[1]!] : [],
  };
}

function isValidLayout(layout: PivotLayout, dimensions: string[]): boolean {
  const all = [...layout.rows, ...layout.cols];
  if (new Set(all).size !== all.length) return false;
  return all.every((d) => dimensions.includes(d));
}

/** Keep a layout that still fits the schema; otherwise fall back with a notice. */
export function repairLayout(
  layout: PivotLayout,
  dimensions: string[],
): { layout: PivotLayout; notice: string | null } {
  if (isValidLayout(layout, dimensions)) return { layout, notice: null };
  const gone = [...layout.rows, ...layout.cols].filter(
    (d) => !dimensions.includes(d),
  );
  const repaired = defaultLayout(dimensions);
  const reason = gone.length > 0
    ? `dimension${gone.length > 1 ? "s" : ""} ${gone.join(", ")} no longer in the schema`
    : "layout repeated a dimension";
  return {
    layout: repaired,
    notice: `layout reset to schema order (${reason})`,
  };
}

function keyOf(cell: Cell, dims: string[]): string[] {
  return dims.map((d) => cell.coordinates[d] ?? "");
}

export function buildPivot(cells: Cell[], layout: PivotLayout): PivotModel {
  const rowKeys: string[][] = [];
  const colKeys: string[][] = [];
  const rowIndex = new Map<string, number>();
  const colIndex = new Map<string, number>();
  const entries = new Map<string, string[]>();

  for (const cell of cells) {
    const rowKey = keyOf(cell, layout.rows);
    const colKey = keyOf(cell, layout.cols);
    const rowId = JSON.stringify(rowKey);
    const colId = JSON.stringify(colKey);
    if (!rowIndex.has(rowId)) {
      rowIndex.set(rowId, rowKeys.length);
      rowKeys.push(rowKey);
    }
    if (!colIndex.has(colId)) {
      colIndex.set(colId, colKeys.length);
      colKeys.push(colKey);
    }
    const slot = `${rowId}|${colId}`;
    const stack = entries.get(slot) ?? [];
    stack.push(cell.value ?? NO_MEASURE);
    entries.set(slot, stack);
  }

  const body = rowKeys.map((rowKey) =>
    colKeys.map(
      (colKey) =>
        entries.get(`${JSON.stringify(rowKey)}|${JSON.stringify(colKey)}`) ?? [],
    ),
  );

  return {
    rowDims: layout.rows,
    colDims: layout.cols,
    rowKeys,
    colKeys,
    body,
    empty: cells.length === 0,
  };
}

/** Every value the grid displays, for checking fidelity to the server response. */
export function displayedValues(model: PivotModel): string[] {
  return model.body.flat(2).filter((v) => v !== NO_MEASURE);
}

/** Explorer view state: mirrors the last server response, never ahead of it.
 *
 * Invariants kept here:
 *  - `version` always equals the version of the last accepted server payload;
 *    every mutating request carries it as a precondition.
 *  - the pivot layout only references current schema dimensions (repaired
 *    with a visible notice when an operation drops or renames one);
 *  - at most one mutation is in flight (`pending` gates the controls);
 *  - the timeline is rebuilt from the server history, so its length always
 *    equals the server-side stack depth.
 */

import { buildTimeline, TimelineItem } from "./history.js";
import {
  buildPivot,
  defaultLayout,
  PivotLayout,
  PivotModel,
  repairLayout,
} from "./pivot.js";
import type {
  Cell,
  CubeSchema,
  Cuboid,
  History,
  OpResponse,
  SessionState,
} from "./types.js";

export class ExplorerState {
  session: string | null = null;
  version = 0;
  depth = 0;
  schema: CubeSchema | null = null;
  cells: Cell[] = [];
  layout: PivotLayout = { rows: [], cols: [] };
  notice: string | null = null;
  warnings: string[] = [];
  trace: string[] = [];
  errorMessage: string | null = null;
  pending = false;
  timeline: TimelineItem[] = [];
  /** Last cube-operation report, if any: a list of cuboids plus a selection. */
  cuboids: Cuboid[] | null = null;
  selectedCuboid: string | null = null;

  /** Gate for the single in-flight mutation; returns false when one is pending. */
  beginMutation(): boolean {
    if (this.pending) return false;
    this.pending = true;
    this.errorMessage = null;
    return true;
  }

  endMutation(): void {
    this.pending = false;
  }

  /** Adopt a server state payload (session create, op response, undo response). */
  applyState(payload: SessionState): void {
    const schemaChanged =
      this.schema === null ||
      JSON.stringify(this.schema.dimensions) !==
        JSON.stringify(payload.schema.dimensions);
    this.session = payload.session;
    this.version = payload.version;
    this.depth = payload.depth;
    this.schema = payload.schema;
    this.cells = payload.cells;
    this.cuboids = null;
    this.selectedCuboid = null;
    if (this.layout.rows.length === 0 && this.layout.cols.length === 0) {
      this.layout = defaultLayout(payload.schema.dimensions);
      this.notice = null;
    } else if (schemaChanged) {
      const fixed = repairLayout(this.layout, payload.schema.dimensions);
      this.layout = fixed.layout;
      this.notice = fixed.notice;
    } else {
      this.notice = null;
    }
  }

  /** Adopt an operation response, including warnings, trace, and cube reports. */
  applyOpResponse(response: OpResponse): void {
    this.applyState(response);
    this.warnings = response.warnings ?? [];
    this.trace = response.trace ?? [];
    if (response.cuboids !== undefined) {
      this.cuboids = response.cuboids;
      // show the finest cuboid first; its label names every kept dimension
      const finest = [...response.cuboids].sort(
        (a, b) => (b.label ?? "").length - (a.label ?? "").length,
      )[0];
      this.selectedCuboid = finest ? finest.label : null;
    }
  }

  syncHistory(history: History): void {
    this.timeline = buildTimeline(history.entries);
    this.depth = history.depth;
    this.version = history.version;
  }

  setLayout(layout: PivotLayout): void {
    const dims = this.schema ? this.schema.dimensions : [];
    const fixed = repairLayout(layout, dims);
    this.layout = fixed.layout;
    this.notice = fixed.notice;
  }

  selectCuboid(label: string | null): void {
    this.selectedCuboid = label;
  }

  /** The cells currently on display: a chosen cuboid's, or the session cube's. */
  displayCells(): Cell[] {
    if (this.cuboids !== null) {
      const chosen = this.cuboids.find((c) => c.label === this.selectedCuboid);
      if (chosen) return chosen.cells;
    }
    return this.cells;
  }

  pivot(): PivotModel {
    return buildPivot(this.displayCells(), this.layout);
  }
}

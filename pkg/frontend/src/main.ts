/** Browser wiring: forms in, server responses out, pure modules in between. */

import { ApiClient } from "./api.js";
import {
  cubeRequest,
  diceRequest,
  drilldownRequest,
  pullRequest,
  pushRequest,
  rollupRequest,
  rotateRequest,
  sliceRequest,
  switchRequest,
} from "./panel.js";
import { NO_MEASURE } from "./pivot.js";
import { ExplorerState } from "./state.js";
import { ApiError, OpRequestBody } from "./types.js";

const api = new ApiClient("..");
const state = new ExplorerState();
/** dimension -> level tags, coarsest first, read from uploaded hierarchy files */
const hierarchyLevels = new Map<string, string[]>();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function membersOf(dimension: string): string[] {
  const seen: string[] = [];
  for (const cell of state.displayCells()) {
    const value = cell.coordinates[dimension];
    if (value !== undefined && !seen.includes(value)) seen.push(value);
  }
  return seen;
}

/** Read level tags (coarsest→finest) from a hierarchy document's first path. */
function levelsFromHierarchy(xml: string): string[] {
  const doc = new DOMParser().parseFromString(xml, "application/xml");
  const levels: string[] = [];
  let node: Element | null = doc.documentElement.firstElementChild;
  while (node) {
    levels.push(node.tagName);
    node = node.firstElementChild;
  }
  return levels;
}

// ---------------------------------------------------------------- rendering

function renderPivot(): void {
  const model = state.pivot();
  const table = el<HTMLTableElement>("pivot");
  table.innerHTML = "";
  if (model.empty) {
    el("pivot-empty").hidden = false;
    return;
  }
  el("pivot-empty").hidden = true;

  const head = table.createTHead().insertRow();
  const corner = document.createElement("th");
  corner.textContent = model.rowDims.join(" / ") || "";
  corner.className = "corner";
  head.appendChild(corner);
  for (const colKey of model.colKeys) {
    const th = document.createElement("th");
    th.textContent = colKey.join(" · ") || (model.colDims.length ? "" : "value");
    head.appendChild(th);
  }

  const body = table.createTBody();
  model.rowKeys.forEach((rowKey, r) => {
    const tr = body.insertRow();
    const th = document.createElement("th");
    th.textContent = rowKey.join(" · ");
    tr.appendChild(th);
    model.colKeys.forEach((_colKey, c) => {
      const td = tr.insertCell();
      const stack = model.body[r]?.[c] ?? [];
      td.textContent = stack.length > 0 ? stack.join(" ") : NO_MEASURE;
      if (stack.length > 1) td.classList.add("stacked");
    });
  });
}

function renderBars(): void {
  const notice = el("notice");
  notice.hidden = state.notice === null;
  notice.textContent = state.notice ?? "";
  const warnings = el("warnings");
  warnings.hidden = state.warnings.length === 0;
  warnings.textContent = state.warnings.join(" — ");
  const error = el("error");
  error.hidden = state.errorMessage === null;
  error.textContent = state.errorMessage ?? "";
  const trace = el("trace");
  trace.hidden = state.trace.length === 0;
  trace.textContent = state.trace.length
    ? `operators: ${state.trace.join(" → ")}`
    : "";
}

function renderHistory(): void {
  const list = el("history");
  list.innerHTML = "";
  state.timeline.forEach((item, index) => {
    const li = document.createElement("li");
    li.textContent = `v${item.version} ${item.label} (${item.cells} cells)`;
    if (index === state.timeline.length - 1) li.classList.add("current");
    list.appendChild(li);
  });
  el<HTMLButtonElement>("undo").disabled = state.pending || state.depth <= 1;
  el("status").textContent =
    `session ${state.session} · version ${state.version} · depth ${state.depth}`;
}

function renderCuboids(): void {
  const picker = el("cuboids");
  picker.hidden = state.cuboids === null;
  picker.innerHTML = "";
  if (state.cuboids === null) return;
  const title = document.createElement("p");
  title.textContent = "cuboids";
  picker.appendChild(title);
  for (const cuboid of state.cuboids) {
    const label = document.createElement("label");
    const radio = document.createElement("input");
    radio.type = "radio";
    radio.name = "cuboid";
    radio.checked = cuboid.label === state.selectedCuboid;
    radio.addEventListener("change", () => {
      state.selectCuboid(cuboid.label);
      renderPivot();
    });
    label.appendChild(radio);
    label.appendChild(
      document.createTextNode(
        ` ${cuboid.label ?? "grand total"} (${cuboid.cells.length})`,
      ),
    );
    picker.appendChild(label);
  }
}

function fillSelect(select: HTMLSelectElement, options: string[]): void {
  const previous = select.value;
  select.innerHTML = "";
  for (const option of options) {
    const node = document.createElement("option");
    node.value = option;
    node.textContent = option;
    select.appendChild(node);
  }
  if (options.includes(previous)) select.value = previous;
}

function renderControls(): void {
  const dims = state.schema ? state.schema.dimensions : [];
  for (const id of ["switch-dim", "push-dim", "slice-dim", "rollup-dim"]) {
    fillSelect(el<HTMLSelectElement>(id), dims);
  }
  fillSelect(
    el<HTMLSelectElement>("drill-dim"),
    dims.filter((d) => hierarchyLevels.has(baseOf(d)) || hierarchyLevels.has(d)),
  );
  const rotateInput = el<HTMLInputElement>("rotate-perm");
  if (!rotateInput.value) rotateInput.value = dims.join(",");
  fillSelect(el<HTMLSelectElement>("layout-rows"), dims);
  fillSelect(el<HTMLSelectElement>("layout-cols"), ["(none)", ...dims]);
  const rows = el<HTMLSelectElement>("layout-rows");
  if (state.layout.rows[0]) rows.value = state.layout.rows[0];
  const cols = el<HTMLSelectElement>("layout-cols");
  cols.value = state.layout.cols[0] ?? "(none)";
  renderSliceMembers();
  renderDiceBoard();
  renderLevelOptions();
  for (const button of document.querySelectorAll<HTMLButtonElement>(
    "#panel button",
  )) {
    button.disabled = state.pending;
  }
}

function baseOf(dimension: string): string {
  return state.schema?.base_dimension[dimension] ?? dimension;
}

function renderSliceMembers(): void {
  const dim = el<HTMLSelectElement>("slice-dim").value;
  const box = el("slice-members");
  box.innerHTML = "";
  for (const member of membersOf(dim)) {
    const label = document.createElement("label");
    const check = document.createElement("input");
    check.type = "checkbox";
    check.value = member;
    label.appendChild(check);
    label.appendChild(document.createTextNode(` ${member}`));
    box.appendChild(label);
  }
}

function renderDiceBoard(): void {
  const board = el("dice-board");
  board.innerHTML = "";
  const dims = state.schema ? state.schema.dimensions : [];
  for (const dim of dims) {
    const group = document.createElement("fieldset");
    const legend = document.createElement("legend");
    legend.textContent = dim;
    group.appendChild(legend);
    for (const member of membersOf(dim)) {
      const label = document.createElement("label");
      const check = document.createElement("input");
      check.type = "checkbox";
      check.dataset.dim = dim;
      check.value = member;
      label.appendChild(check);
      label.appendChild(document.createTextNode(` ${member}`));
      group.appendChild(label);
    }
    board.appendChild(group);
  }
}

function renderLevelOptions(): void {
  const rollupDim = el<HTMLSelectElement>("rollup-dim").value;
  const chain = hierarchyLevels.get(baseOf(rollupDim)) ?? [];
  const current = state.schema?.level_of[rollupDim] ?? rollupDim;
  fillSelect(
    el<HTMLSelectElement>("rollup-level"),
    chain.filter((level) => level !== current),
  );
  const drillDim = el<HTMLSelectElement>("drill-dim").value;
  const drillChain = hierarchyLevels.get(baseOf(drillDim)) ?? [];
  const position = drillChain.indexOf(drillDim);
  fillSelect(
    el<HTMLSelectElement>("drill-level"),
    position >= 0 ? drillChain.slice(position + 1) : drillChain,
  );
}

function renderAll(): void {
  renderPivot();
  renderBars();
  renderHistory();
  renderCuboids();
  renderControls();
}

// ------------------------------------------------------------------ actions

async function refreshHistory(): Promise<void> {
  if (!state.session) return;
  state.syncHistory(await api.history(state.session));
}

async function runOp(body: OpRequestBody): Promise<void> {
  if (!state.session || !state.beginMutation()) return;
  renderControls();
  try {
    const response = await api.applyOp(state.session, {
      ...body,
      version: state.version,
    });
    state.applyOpResponse(response);
    await refreshHistory();
  } catch (error) {
    state.errorMessage = error instanceof ApiError
      ? error.message
      : String(error);
    if (error instanceof ApiError && error.status === 412) {
      const fresh = await api.getCube(state.session);
      state.applyState(fresh);
      await refreshHistory();
      state.errorMessage = "state was stale — reloaded the current version";
    }
  } finally {
    state.endMutation();
    renderAll();
  }
}

async function runUndo(): Promise<void> {
  if (!state.session || !state.beginMutation()) return;
  try {
    state.applyState(await api.undo(state.session));
    await refreshHistory();
  } catch (error) {
    state.errorMessage = error instanceof ApiError
      ? error.message
      : String(error);
  } finally {
    state.endMutation();
    renderAll();
  }
}

function checkedMembers(container: HTMLElement): [string, string][] {
  const picked: [string, string][] = [];
  for (const box of container.querySelectorAll<HTMLInputElement>(
    "input[type=checkbox]:checked",
  )) {
    picked.push([box.dataset.dim ?? "", box.value]);
  }
  return picked;
}

function wire(): void {
  el<HTMLFormElement>("upload-form").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const factsInput = el<HTMLInputElement>("facts-file");
    const hierInput = el<HTMLInputElement>("hierarchy-files");
    const facts = factsInput.files?.[0];
    if (!facts) return;
    const hierarchies = Array.from(hierInput.files ?? []);
    try {
      hierarchyLevels.clear();
      for (const file of hierarchies) {
        const levels = levelsFromHierarchy(await file.text());
        const finest = levels[levels.length - 1];
        if (finest) hierarchyLevels.set(finest, levels);
      }
      state.applyState(await api.createSession(facts, hierarchies));
      await refreshHistory();
      el("app").hidden = false;
      state.errorMessage = null;
    } catch (error) {
      state.errorMessage = error instanceof ApiError
        ? error.message
        : String(error);
    }
    renderAll();
  });

  el("undo").addEventListener("click", () => void runUndo());

  el<HTMLFormElement>("rotate-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const perm = el<HTMLInputElement>("rotate-perm").value
      .split(",")
      .map((p) => p.trim())
      .filter(Boolean);
    void runOp(rotateRequest(perm));
  });

  el<HTMLFormElement>("switch-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    void runOp(
      switchRequest(
        el<HTMLSelectElement>("switch-dim").value,
        el<HTMLInputElement>("switch-a").value.trim(),
        el<HTMLInputElement>("switch-b").value.trim(),
      ),
    );
  });

  el<HTMLFormElement>("push-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    void runOp(pushRequest(el<HTMLSelectElement>("push-dim").value));
  });

  el("pull-button").addEventListener("click", () => void runOp(pullRequest()));

  el<HTMLSelectElement>("slice-dim").addEventListener("change", () =>
    renderSliceMembers(),
  );
  el<HTMLFormElement>("slice-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const members = checkedMembers(el("slice-members")).map(([, m]) => m);
    void runOp(sliceRequest(el<HTMLSelectElement>("slice-dim").value, members));
  });

  el<HTMLFormElement>("dice-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    void runOp(diceRequest(checkedMembers(el("dice-board"))));
  });

  el<HTMLSelectElement>("rollup-dim").addEventListener("change", () =>
    renderLevelOptions(),
  );
  el<HTMLSelectElement>("drill-dim").addEventListener("change", () =>
    renderLevelOptions(),
  );
  el<HTMLFormElement>("rollup-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    void runOp(
      rollupRequest(
        el<HTMLSelectElement>("rollup-dim").value,
        el<HTMLSelectElement>("rollup-level").value,
        el<HTMLSelectElement>("rollup-agg").value,
      ),
    );
  });

  el<HTMLFormElement>("drill-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    void runOp(
      drilldownRequest(
        el<HTMLSelectElement>("drill-dim").value,
        el<HTMLSelectElement>("drill-level").value,
        el<HTMLSelectElement>("drill-agg").value,
      ),
    );
  });

  el<HTMLFormElement>("cube-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    void runOp(cubeRequest(el<HTMLSelectElement>("cube-agg").value));
  });

  const applyLayout = () => {
    const rows = el<HTMLSelectElement>("layout-rows").value;
    const cols = el<HTMLSelectElement>("layout-cols").value;
    state.setLayout({
      rows: rows ? [rows] : [],
      cols: cols && cols !== "(none)" ? [cols] : [],
    });
    renderPivot();
    renderBars();
  };
  el<HTMLSelectElement>("layout-rows").addEventListener("change", applyLayout);
  el<HTMLSelectElement>("layout-cols").addEventListener("change", applyLayout);
}

wire();

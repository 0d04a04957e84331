/** The explorer loop against the real service:
 * load → roll-up → drill-down → slice → undo ×3 must end at the base grid,
 * with the history timeline tracking the server stack at every step.
 */

import { ChildProcess, spawn } from "node:child_process";
import { readFileSync } from "node:fs";
import { dirname, resolve } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { drilldownRequest, rollupRequest, sliceRequest } from "../src/panel.js";
import { displayedValues } from "../src/pivot.js";
import { ExplorerState } from "../src/state.js";

const PORT = 8977;
const BASE_URL = `http://127.0.0.1:${PORT}`;
const REPO_ROOT = resolve(dirname(fileURLToPath(import.meta.url)), "../..");

let server: ChildProcess;

async function waitForHealth(): Promise<void> {
  const deadline = Date.now() + 20_000;
  for (;;) {
    try {
      const response = await fetch(`${BASE_URL}/health`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("service did not come up");
    await new Promise((resolveSleep) => setTimeout(resolveSleep, 200));
  }
}

beforeAll(async () => {
  server = spawn(
    "python3",
    [
      "-c",
      "import uvicorn; from treecube.service import create_app; " +
        `uvicorn.run(create_app(), host='127.0.0.1', port=${PORT}, log_level='warning')`,
    ],
    { cwd: REPO_ROOT, stdio: ["ignore", "ignore", "pipe"] },
  );
  server.stderr?.on("data", () => {});
  await waitForHealth();
});

afterAll(async () => {
  server.kill("SIGTERM");
  await new Promise((resolveExit) => server.once("exit", resolveExit));
});

function corpusBlob(name: string): Blob {
  return new Blob([readFileSync(resolve(REPO_ROOT, "corpus", name))], {
    type: "application/xml",
  });
}

describe("explorer loop", () => {
  const api = new ApiClient(BASE_URL);
  const state = new ExplorerState();

  async function syncAndCheckHistory(): Promise<void> {
    const history = await api.history(state.session!);
    state.syncHistory(history);
    expect(state.timeline.length).toBe(history.depth);
    expect(state.timeline.length).toBe(history.entries.length);
  }

  function expectServerFidelity(): void {
    const serverValues = state.displayCells().map((c) => c.value);
    for (const shown of displayedValues(state.pivot())) {
      expect(serverValues).toContain(shown);
    }
  }

  it("loads the fixture into a 5-cell base grid", async () => {
    state.applyState(
      await api.createSession(corpusBlob("sales.xml"), [corpusBlob("geo.xml")]),
    );
    await syncAndCheckHistory();
    expect(state.cells.length).toBe(5);
    expect(state.depth).toBe(1);
    expect(state.schema!.dimensions).toEqual(["city", "product", "year"]);
    expectServerFidelity();
  });

  it("rolls city up to department", async () => {
    expect(state.beginMutation()).toBe(true);
    const response = await api.applyOp(state.session!, {
      ...rollupRequest("city", "department", "sum"),
      version: state.version,
    });
    state.applyOpResponse(response);
    state.endMutation();
    await syncAndCheckHistory();

    expect(state.cells.length).toBe(4);
    const values = state.cells.map((c) => c.value);
    expect(values).toContain("17"); // 69 = Lyon 10 + Villeurbanne 7
    expect(state.layout.rows).toEqual(["department"]);
    expect(state.notice).toContain("city"); // visible layout-repair notice
    expect(state.timeline.length).toBe(2);
    expectServerFidelity();
  });

  it("drills back down to cities", async () => {
    expect(state.beginMutation()).toBe(true);
    const response = await api.applyOp(state.session!, {
      ...drilldownRequest("department", "city", "sum"),
      version: state.version,
    });
    state.applyOpResponse(response);
    state.endMutation();
    await syncAndCheckHistory();

    expect(state.cells.length).toBe(5);
    expect(state.timeline.length).toBe(3);
    expectServerFidelity();
  });

  it("slices down to Keyboard facts", async () => {
    expect(state.beginMutation()).toBe(true);
    const response = await api.applyOp(state.session!, {
      ...sliceRequest("product", ["Keyboard"]),
      version: state.version,
    });
    state.applyOpResponse(response);
    state.endMutation();
    await syncAndCheckHistory();

    expect(state.cells.length).toBe(4);
    for (const cell of state.cells) {
      expect(cell.coordinates["product"]).toBe("Keyboard");
    }
    expect(state.timeline.length).toBe(4);
    expectServerFidelity();
  });

  it("undoes three times back to the base grid", async () => {
    for (const expectedDepth of [3, 2, 1]) {
      expect(state.beginMutation()).toBe(true);
      state.applyState(await api.undo(state.session!));
      state.endMutation();
      await syncAndCheckHistory();
      expect(state.depth).toBe(expectedDepth);
    }

    expect(state.cells.length).toBe(5);
    expect(state.schema!.dimensions).toEqual(["city", "product", "year"]);
    const model = state.pivot();
    expect(model.rowKeys).toEqual([["Lyon"], ["Villeurbanne"], ["Paris"]]);
    const lyonKeyboard = model.body[0]![0];
    expect(lyonKeyboard).toEqual(["10", "4"]);
    expectServerFidelity();
  });

  it("keeps version preconditions honest", async () => {
    await expect(
      api.applyOp(state.session!, {
        ...sliceRequest("product", ["Keyboard"]),
        version: 0, // stale: many mutations have happened
      }),
    ).rejects.toMatchObject({ status: 412 });
  });
});

/** Builders for operation request bodies — one per cube operation.
 *
 * These produce exactly the JSON the service expects; the caller adds the
 * optional `version` precondition before sending.
 */

import type { OpRequestBody } from "./types.js";

export function rotateRequest(perm: string[]): OpRequestBody {
  return { op: "rotate", perm };
}

export function switchRequest(
  dimension: string,
  first: string,
  second: string,
): OpRequestBody {
  return { op: "switch", dimension, members: [first, second] };
}

export function pushRequest(dimension: string): OpRequestBody {
  return { op: "push", dimension };
}

export function pullRequest(): OpRequestBody {
  return { op: "pull" };
}

export function sliceRequest(
  dimension: string,
  members: string[],
): OpRequestBody {
  return { op: "slice", dimension, members };
}

export function diceRequest(where: [string, string][]): OpRequestBody {
  return { op: "dice", where };
}

export function rollupRequest(
  dimension: string,
  level: string,
  agg: string,
): OpRequestBody {
  return { op: "rollup", dimension, level, agg };
}

export function drilldownRequest(
  dimension: string,
  level: string,
  agg: string,
): OpRequestBody {
  return { op: "drilldown", dimension, level, agg };
}

export function cubeRequest(agg: string): OpRequestBody {
  return { op: "cube", agg };
}

/** History timeline view model: one labeled item per server stack entry. */

import type { HistoryEntry } from "./types.js";

export interface TimelineItem {
  version: number;
  label: string;
  cells: number;
  warnings: string[];
}

/** Human label for an operation request dict (null = the loaded base cube). */
export function describeOp(op: Record<string, unknown> | null): string {
  if (op === null) return "base";
  const name = String(op["op"] ?? "?");
  const parts: string[] = [];
  if (Array.isArray(op["perm"])) parts.push((op["perm"] as string[]).join(">"));
  if (typeof op["dimension"] === "string") parts.push(op["dimension"]);
  if (Array.isArray(op["members"]) && (op["members"] as string[]).length > 0) {
    parts.push((op["members"] as string[]).join(","));
  }
  if (Array.isArray(op["where"]) && (op["where"] as unknown[]).length > 0) {
    parts.push(
      (op["where"] as [string, string][])
        .map(([d, m]) => `${d}=${m}`)
        .join(" & "),
    );
  }
  if (typeof op["level"] === "string") parts.push(`to ${op["level"]}`);
  if (typeof op["agg"] === "string") parts.push(String(op["agg"]));
  return parts.length > 0 ? `${name} ${parts.join(" ")}` : name;
}

export function buildTimeline(entries: HistoryEntry[]): TimelineItem[] {
  return entries.map((entry) => ({
    version: entry.version,
    label: describeOp(entry.op),
    cells: entry.cells,
    warnings: entry.warnings,
  }));
}

/** Server payload types, validated at the HTTP boundary with zod. */

import { z } from "zod";

export const SchemaPayload = z.object({
  fact_tag: z.string(),
  collection_tag: z.string(),
  dimensions: z.array(z.string()),
  measure: z.string().nullable(),
  pushed: z.array(z.string()),
  level_of: z.record(z.string(), z.string()),
  base_dimension: z.record(z.string(), z.string()),
});
export type CubeSchema = z.infer<typeof SchemaPayload>;

export const CellPayload = z.object({
  coordinates: z.record(z.string(), z.string()),
  value: z.string().nullable(),
});
export type Cell = z.infer<typeof CellPayload>;

export const StatePayload = z.object({
  session: z.string(),
  version: z.number().int(),
  depth: z.number().int(),
  schema: SchemaPayload,
  cells: z.array(CellPayload),
});
export type SessionState = z.infer<typeof StatePayload>;

export const CuboidPayload = z.object({
  label: z.string().nullable(),
  cells: z.array(CellPayload),
});
export type Cuboid = z.infer<typeof CuboidPayload>;

export const OpResponsePayload = StatePayload.extend({
  warnings: z.array(z.string()).optional(),
  trace: z.array(z.string()).optional(),
  document: z.string().optional(),
  cuboids: z.array(CuboidPayload).optional(),
});
export type OpResponse = z.infer<typeof OpResponsePayload>;

export const CubeXmlPayload = StatePayload.extend({ xml: z.string() });
export type CubeXml = z.infer<typeof CubeXmlPayload>;

export const HistoryEntryPayload = z.object({
  version: z.number().int(),
  op: z.record(z.string(), z.unknown()).nullable(),
  cells: z.number().int(),
  warnings: z.array(z.string()),
});
export type HistoryEntry = z.infer<typeof HistoryEntryPayload>;

export const HistoryPayload = z.object({
  session: z.string(),
  version: z.number().int(),
  depth: z.number().int(),
  entries: z.array(HistoryEntryPayload),
});
export type History = z.infer<typeof HistoryPayload>;

export const ErrorDetailPayload = z.object({
  message: z.string().optional(),
  error: z.string().optional(),
  issues: z.array(z.unknown()).optional(),
  expected: z.number().optional(),
  current: z.number().optional(),
});

/** An operation request body, mirroring the CLI's vocabulary. */
export interface OpRequestBody {
  op: string;
  dimension?: string;
  level?: string;
  agg?: string;
  perm?: string[];
  members?: string[];
  where?: [string, string][];
  version?: number;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
    public readonly detail?: unknown,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

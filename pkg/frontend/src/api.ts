/** Thin fetch client for the cube service. Every response is zod-validated. */

import {
  ApiError,
  CubeXml,
  CubeXmlPayload,
  ErrorDetailPayload,
  History,
  HistoryPayload,
  OpRequestBody,
  OpResponse,
  OpResponsePayload,
  SessionState,
  StatePayload,
} from "./types.js";

async function fail(response: Response): Promise<never> {
  let message = `${response.status} ${response.statusText}`;
  let detail: unknown;
  try {
    const body = (await response.json()) as { detail?: unknown };
    detail = body.detail ?? body;
    const parsed = ErrorDetailPayload.safeParse(detail);
    if (parsed.success && parsed.data.message) message = parsed.data.message;
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(response.status, message, detail);
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async createSession(
    facts: Blob,
    hierarchies: Blob[] = [],
  ): Promise<SessionState> {
    const form = new FormData();
    form.append("facts", facts, "facts.xml");
    for (const [i, h] of hierarchies.entries()) {
      form.append("hierarchies", h, `hierarchy${i}.xml`);
    }
    const response = await fetch(this.url("/sessions"), {
      method: "POST",
      body: form,
    });
    if (!response.ok) await fail(response);
    return StatePayload.parse(await response.json());
  }

  async getCube(session: string): Promise<CubeXml> {
    const response = await fetch(this.url(`/sessions/${session}/cube`));
    if (!response.ok) await fail(response);
    return CubeXmlPayload.parse(await response.json());
  }

  async applyOp(session: string, body: OpRequestBody): Promise<OpResponse> {
    const response = await fetch(this.url(`/sessions/${session}/ops`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) await fail(response);
    return OpResponsePayload.parse(await response.json());
  }

  async undo(session: string): Promise<SessionState> {
    const response = await fetch(this.url(`/sessions/${session}/undo`), {
      method: "POST",
    });
    if (!response.ok) await fail(response);
    return StatePayload.parse(await response.json());
  }

  async history(session: string): Promise<History> {
    const response = await fetch(this.url(`/sessions/${session}/history`));
    if (!response.ok) await fail(response);
    return HistoryPayload.parse(await response.json());
  }
}

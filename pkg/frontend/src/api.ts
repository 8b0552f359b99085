// Thin typed client over the annotation service's HTTP JSON API.

import type { Agreement, Progress, QueueItem, QueueResponse, VerdictAck } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let detail = resp.statusText;
  try {
    const body = (await resp.json()) as { detail?: unknown };
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(resp.status, detail);
}

export class AnnotationApi {
  constructor(private readonly base: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(`${this.base}${path}`);
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  async fetchQueue(annotator: string): Promise<QueueItem[]> {
    const body = await this.getJson<QueueResponse>(
      `/api/queue?annotator=${encodeURIComponent(annotator)}`,
    );
    return body.items;
  }

  async submitVerdict(
    sampleId: string,
    annotator: string,
    label: string,
    token?: string,
  ): Promise<VerdictAck> {
    const resp = await fetch(`${this.base}/api/verdict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        sample_id: sampleId,
        annotator,
        label,
        token: token ?? null,
      }),
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as VerdictAck;
  }

  progress(): Promise<Progress> {
    return this.getJson<Progress>("/api/progress");
  }

  agreement(): Promise<Agreement> {
    return this.getJson<Agreement>("/api/agreement");
  }
}

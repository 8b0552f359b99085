// Queue session state: optimistic verdict submission with restore-on-failure.

import { ApiError } from "./api.js";
import type { QueueItem, VerdictAck } from "./types.js";

export interface QueueApi {
  fetchQueue(annotator: string): Promise<QueueItem[]>;
  submitVerdict(
    sampleId: string,
    annotator: string,
    label: string,
    token?: string,
  ): Promise<VerdictAck>;
}

export interface SubmitResult {
  ok: boolean;
  status?: string;
  error?: string;
  conflict?: boolean;
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.status}: ${err.message}`;
  if (err instanceof Error) return err.message;
  return String(err);
}

export class QueueController {
  private items: QueueItem[] = [];
  private judged = new Set<string>();
  /** Set while the service is unreachable; the last queue stays usable. */
  lastError: string | null = null;

  constructor(
    private readonly api: QueueApi,
    readonly annotator: string,
  ) {}

  /** Refetch the pending queue; a network failure preserves current items. */
  async refresh(): Promise<void> {
    try {
      const items = await this.api.fetchQueue(this.annotator);
      this.items = items.filter((item) => !this.judged.has(item.sample_id));
      this.lastError = null;
    } catch (err) {
      this.lastError = describe(err);
    }
  }

  current(): QueueItem | null {
    return this.items[0] ?? null;
  }

  size(): number {
    return this.items.length;
  }

  done(): boolean {
    return this.items.length === 0;
  }

  /**
   * Submit a verdict for the current item.
   *
   * The item leaves the queue immediately (optimistic). On a validation
   * failure or network error it is restored at the front; on a conflict
   * (item resolved underneath us) it stays dropped and the caller should
   * refresh.
   */
  async submit(label: string): Promise<SubmitResult> {
    const item = this.current();
    if (item === null) return { ok: false, error: "queue is empty" };

    this.items = this.items.slice(1);
    this.judged.add(item.sample_id);
    const token = `${item.sample_id}:${this.annotator}`;
    try {
      const ack = await this.api.submitVerdict(item.sample_id, this.annotator, label, token);
      this.lastError = null;
      return { ok: true, status: ack.status };
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        return { ok: false, conflict: true, error: describe(err) };
      }
      this.judged.delete(item.sample_id);
      this.items = [item, ...this.items];
      return { ok: false, error: describe(err) };
    }
  }
}

import { describe, expect, it } from "vitest";

import { ApiError } from "../src/api.js";
import { QueueController } from "../src/state.js";
import type { QueueApi } from "../src/state.js";
import type { QueueItem, VerdictAck } from "../src/types.js";

function sample(id: string): QueueItem {
  return {
    sample_id: id,
    dialogue_id: id.split("#")[0],
    index: Number(id.split("#")[1]),
    text: `text of ${id}`,
    domain: "family",
    context: [{ speaker: "A", text: `text of ${id}`, target: true }],
    labels: ["happiness", "neutral", "fear", "sadness", "anger"],
  };
}

class FakeApi implements QueueApi {
  queue: QueueItem[] = [];
  failSubmitWith: unknown = null;
  failFetchWith: unknown = null;
  submitted: Array<{ sampleId: string; label: string; token?: string }> = [];

  async fetchQueue(): Promise<QueueItem[]> {
    if (this.failFetchWith) throw this.failFetchWith;
    return [...this.queue];
  }

  async submitVerdict(
    sampleId: string,
    _annotator: string,
    label: string,
    token?: string,
  ): Promise<VerdictAck> {
    if (this.failSubmitWith) throw this.failSubmitWith;
    this.submitted.push({ sampleId, label, token });
    return { sample_id: sampleId, status: "pending", your_label: label, token: token ?? null };
  }
}

describe("QueueController", () => {
  it("loads the queue and advances optimistically on submit", async () => {
    const api = new FakeApi();
    api.queue = [sample("d#0"), sample("d#1")];
    const controller = new QueueController(api, "r1");
    await controller.refresh();
    expect(controller.size()).toBe(2);

    const result = await controller.submit("fear");
    expect(result.ok).toBe(true);
    expect(controller.current()?.sample_id).toBe("d#1");
    expect(api.submitted[0]).toEqual({ sampleId: "d#0", label: "fear", token: "d#0:r1" });
  });

  it("restores the item on a validation failure", async () => {
    const api = new FakeApi();
    api.queue = [sample("d#0")];
    const controller = new QueueController(api, "r1");
    await controller.refresh();

    api.failSubmitWith = new ApiError(422, "label 'joy' is not one of the five categories");
    const result = await controller.submit("joy");
    expect(result.ok).toBe(false);
    expect(result.error).toContain("422");
    expect(controller.current()?.sample_id).toBe("d#0");
  });

  it("drops the item on a resolved-underneath conflict", async () => {
    const api = new FakeApi();
    api.queue = [sample("d#0"), sample("d#1")];
    const controller = new QueueController(api, "r1");
    await controller.refresh();

    api.failSubmitWith = new ApiError(409, "sample 'd#0' is already accepted");
    const result = await controller.submit("fear");
    expect(result.ok).toBe(false);
    expect(result.conflict).toBe(true);
    expect(controller.current()?.sample_id).toBe("d#1");
  });

  it("keeps the previous queue when a refresh fails", async () => {
    const api = new FakeApi();
    api.queue = [sample("d#0")];
    const controller = new QueueController(api, "r1");
    await controller.refresh();
    expect(controller.lastError).toBeNull();

    api.failFetchWith = new Error("connect ECONNREFUSED");
    await controller.refresh();
    expect(controller.size()).toBe(1);
    expect(controller.lastError).toContain("ECONNREFUSED");
  });

  it("filters items it already judged out of refreshed queues", async () => {
    const api = new FakeApi();
    api.queue = [sample("d#0"), sample("d#1")];
    const controller = new QueueController(api, "r1");
    await controller.refresh();
    await controller.submit("anger");

    // the service may still list d#0 as pending (one verdict of two)
    await controller.refresh();
    expect(controller.size()).toBe(1);
    expect(controller.current()?.sample_id).toBe("d#1");
  });

  it("reports an empty queue as done", async () => {
    const api = new FakeApi();
    const controller = new QueueController(api, "r1");
    await controller.refresh();
    expect(controller.done()).toBe(true);
    const result = await controller.submit("fear");
    expect(result.ok).toBe(false);
  });
});

// Browser bootstrap: annotator session, queue loop, progress/agreement panes.

import { AnnotationApi } from "./api.js";
import { QueueController } from "./state.js";
import {
  renderAgreement,
  renderEmptyQueue,
  renderErrorBanner,
  renderProgress,
  renderQueueItem,
} from "./view.js";

const POLL_MS = 5000;

function mount(): void {
  const app = document.getElementById("app");
  if (!app) throw new Error("missing #app mount point");

  const annotator = (window.localStorage.getItem("annotator") ?? "").trim();
  if (!annotator) {
    const entered = (window.prompt("Annotator id:") ?? "").trim();
    if (!entered) {
      app.innerHTML = "<p>An annotator id is required.</p>";
      return;
    }
    window.localStorage.setItem("annotator", entered);
  }
  const id = (window.localStorage.getItem("annotator") ?? "").trim();

  const api = new AnnotationApi("");
  const controller = new QueueController(api, id);

  const queuePane = document.createElement("div");
  const statsPane = document.createElement("div");
  app.replaceChildren(queuePane, statsPane);

  async function redrawQueue(): Promise<void> {
    const banner = controller.lastError ? renderErrorBanner(controller.lastError) : "";
    const item = controller.current();
    queuePane.innerHTML = item
      ? banner + renderQueueItem(item, controller.size())
      : banner + renderEmptyQueue(id);
  }

  async function redrawStats(): Promise<void> {
    try {
      const [progress, agreement] = await Promise.all([api.progress(), api.agreement()]);
      statsPane.innerHTML = renderProgress(progress) + renderAgreement(agreement);
    } catch (err) {
      statsPane.innerHTML = renderErrorBanner(err instanceof Error ? err.message : String(err));
    }
  }

  queuePane.addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest("button.label-btn");
    if (!(button instanceof HTMLButtonElement) || button.disabled) return;
    const label = button.dataset.label;
    if (!label) return;
    // disable until the submit settles; double clicks reuse the same token
    queuePane.querySelectorAll("button.label-btn").forEach((b) => {
      (b as HTMLButtonElement).disabled = true;
    });
    void controller.submit(label).then(async (result) => {
      if (result.conflict) await controller.refresh();
      await redrawQueue();
      void redrawStats();
    });
  });

  void controller.refresh().then(redrawQueue);
  void redrawStats();
  window.setInterval(() => {
    void controller.refresh().then(redrawQueue);
    void redrawStats();
  }, POLL_MS);
}

document.addEventListener("DOMContentLoaded", mount);

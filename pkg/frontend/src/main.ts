/** Browser bootstrap: fetch a task, run the session, sync drafts. */

import { TaskServiceClient } from "./api.js";
import { getSelectionSpan, render, type ViewHandlers } from "./render.js";
import { AnnotationSession } from "./state.js";
import type { Protocol } from "./types.js";

function statusLine(root: HTMLElement, message: string): void {
  root.replaceChildren();
  const p = root.ownerDocument.createElement("p");
  p.id = "status";
  p.textContent = message;
  root.appendChild(p);
}

export async function boot(root: HTMLElement, win: Window): Promise<void> {
  const params = new URLSearchParams(win.location.search);
  const annotator = params.get("annotator") ?? "anonymous";
  const protocol = (params.get("protocol") as Protocol | null) ?? undefined;
  const base = params.get("service") ?? "";
  const client = new TaskServiceClient(base);

  const response = await client.nextTask(annotator, protocol);
  if (response.status === "refused") {
    statusLine(root, `No tasks for you: ${response.reason}`);
    return;
  }
  if (response.status === "no_task" || !response.task) {
    statusLine(root, "No tasks available right now.");
    return;
  }

  const session = new AnnotationSession(annotator, response.task, {
    onDraft: (record) => {
      void client.submitAnnotation(record).catch(() => {
        /* draft sync is best-effort; the final submit surfaces errors */
      });
    },
  });

  const rerender = () => render(root, session, handlers);
  const handlers: ViewHandlers = {
    onSelectMarkable: (id) => {
      session.selectMarkable(id);
      rerender();
    },
    onToggleEntity: (id) => {
      session.toggleEntity(id);
      rerender();
    },
    onLink: () => {
      session.linkEntities();
      rerender();
    },
    onLinkEntity: () => {
      session.addSpan(getSelectionSpan(win));
      rerender();
    },
    onFinalize: () => {
      session.finalizeSpans();
      rerender();
    },
    onNoReference: () => {
      session.markNoReference();
      rerender();
    },
    onAddEntity: (name) => {
      if (!name.trim()) return;
      client
        .addEntity(annotator, session.document.id, name)
        .then((entity) => {
          session.registerEntity(entity);
          rerender();
        })
        .catch(() => statusLine(root, "could not add entity"));
    },
    onSubmit: () => {
      if (!session.submitEnabled()) return;
      client.submitAnnotation(session.buildRecord()).then((outcome) => {
        if (outcome.status === "accepted") {
          statusLine(root, "Submitted. Thank you!");
        } else if (outcome.violations?.some((v) => v.code === "overtime")) {
          statusLine(root, "Time limit exceeded; the task was not accepted.");
        } else {
          statusLine(root, `Submission ${outcome.status}: ${outcome.reason ?? ""}`);
        }
      });
    },
  };

  rerender();
  win.setInterval(() => {
    const countdown = root.querySelector("#countdown");
    if (countdown) countdown.textContent = `${Math.floor(session.remainingSeconds())} s left`;
    const submit = root.querySelector<HTMLButtonElement>("#submit-button");
    if (submit) submit.disabled = !session.submitEnabled();
  }, 1000);
}

declare global {
  interface Window {
    groundcorefBoot?: typeof boot;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  window.groundcorefBoot = boot;
  const root = document.getElementById("app");
  if (root) {
    void boot(root, window);
  }
}

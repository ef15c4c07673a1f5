/** Entry point: read configuration from the URL and run the session. */

import { HttpStudyApi } from "./api.js";
import { DomView } from "./render.js";
import { SessionRunner } from "./session.js";
import { monotonicClock, timeoutScheduler } from "./timing.js";

function fatal(root: HTMLElement, message: string): void {
  root.textContent = "";
  const banner = document.createElement("div");
  banner.className = "error-banner";
  banner.textContent = message;
  root.append(banner);
}

export function boot(root: HTMLElement, search: string = window.location.search): void {
  const params = new URLSearchParams(search);
  const server = params.get("server") ?? window.location.origin;
  const session = params.get("session");
  const token = params.get("token");
  if (!session || !token) {
    fatal(root, "Missing session or token. Open this page with ?session=...&token=... " +
      "(and optionally &server=...).");
    return;
  }
  const api = new HttpStudyApi(server);
  let runner: SessionRunner;
  const view = new DomView(root, {
    background: params.get("bg") ?? undefined,
    imagePixels: params.has("px") ? Number(params.get("px")) : undefined,
    onAssetError: (label) => runner.pause(`Stimulus failed to load: ${label}`),
  });
  runner = new SessionRunner(api, view, monotonicClock, timeoutScheduler, {
    sessionId: session,
    token,
  });
  void runner.start();
}

const mount = document.getElementById("survey");
if (mount !== null) {
  boot(mount);
}

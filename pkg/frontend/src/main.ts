/**
 * Entry point: reads the console configuration (API base URL and token,
 * nothing else) and routes between the two faces by URL hash:
 *
 *   #/dashboard             organizer dashboard (default)
 *   #/workspace/ann-007     workspace for one annotator
 */

import { ConsoleApi, ConsoleConfig } from "./api.js";
import { renderDashboard } from "./dashboard.js";
import { renderWorkspace } from "./workspace.js";
import { el } from "./dom.js";

declare global {
  interface Window {
    CVSOPS_CONSOLE?: Partial<ConsoleConfig>;
  }
}

function readConfig(): ConsoleConfig {
  const given = window.CVSOPS_CONSOLE ?? {};
  return { baseUrl: given.baseUrl ?? "", token: given.token };
}

function route(root: HTMLElement, api: ConsoleApi): void {
  const hash = window.location.hash || "#/dashboard";
  const workspace = hash.match(/^#\/workspace\/?(.*)$/);
  if (workspace) {
    const annotatorId = decodeURIComponent(workspace[1]);
    if (annotatorId) {
      void renderWorkspace(root, api, annotatorId);
    } else {
      renderPicker(root);
    }
  } else {
    void renderDashboard(root, api);
  }
}

/** Asks for the annotator id when #/workspace/ has none. */
function renderPicker(root: HTMLElement): void {
  root.replaceChildren();
  const input = el("input", { type: "text", placeholder: "annotator id" });
  const go = el("button", { type: "button" }, "open workspace");
  go.addEventListener("click", () => {
    const id = input.value.trim();
    if (id) window.location.hash = `#/workspace/${encodeURIComponent(id)}`;
  });
  root.append(el("p", { class: "picker" }, "who is annotating? ", input, " ", go));
}

export function boot(root: HTMLElement): void {
  const api = new ConsoleApi(readConfig());
  const nav = el(
    "nav",
    { class: "top-nav" },
    el("a", { href: "#/dashboard" }, "dashboard"),
    " ",
    el("a", { href: "#/workspace/" }, "workspace"),
  );
  const view = el("main", { id: "view" });
  root.append(nav, view);
  window.addEventListener("hashchange", () => route(view, api));
  route(view, api);
}

const mount = typeof document !== "undefined" ? document.getElementById("app") : null;
if (mount) {
  boot(mount);
}

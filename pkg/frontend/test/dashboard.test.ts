import { beforeEach, describe, expect, it } from "vitest";

import { ConsoleApi } from "../src/api.js";
import { renderDashboard } from "../src/dashboard.js";
import {
  COVERAGE,
  FUNNEL,
  LEADERBOARD_EMPTY,
  LEADERBOARD_FINAL,
  LEADERBOARD_MALFORMED,
  LEADERBOARD_TIE,
  OVERDUE,
  PUBLISHED_ORDER,
} from "./fixtures.js";
import { StubFixtures, makeStub } from "./stub.js";

const TOKEN = "stub-token";

async function mount(overrides: Partial<StubFixtures> = {}): Promise<HTMLElement> {
  const stub = makeStub({
    token: TOKEN,
    funnel: FUNNEL,
    coverage: COVERAGE,
    overdue: OVERDUE,
    leaderboard: LEADERBOARD_FINAL,
    ...overrides,
  });
  const api = new ConsoleApi({ baseUrl: "", token: TOKEN }, stub.fetchImpl);
  const root = document.createElement("div");
  document.body.append(root);
  await renderDashboard(root, api);
  return root;
}

function text(scope: ParentNode, selector: string): string {
  const node = scope.querySelector(selector);
  if (!node) throw new Error(`no element matches ${selector}`);
  return node.textContent ?? "";
}

function raw(scope: ParentNode, selector: string): string | null {
  const node = scope.querySelector(selector);
  if (!node) throw new Error(`no element matches ${selector}`);
  return node.getAttribute("data-raw");
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("leaderboard", () => {
  it("renders the reference standings in the order the API sent", async () => {
    const root = await mount();
    const rows = [...root.querySelectorAll("table.leaderboard tbody tr")];
    expect(rows).toHaveLength(14);

    const rankedIds = rows
      .filter((row) => !row.classList.contains("baseline"))
      .map((row) => text(row, ".team-id"));
    expect(rankedIds).toEqual(PUBLISHED_ORDER);

    const first = rows[0];
    expect(text(first, ".overall-rank")).toBe("1");
    expect(text(first, ".team-id")).toBe("theator");
    expect(text(first, ".rank-detection")).toBe("2");
    expect(text(first, ".rank-calibration")).toBe("1");
    expect(text(first, ".rank-robustness")).toBe("2");
    expect(text(first, ".map")).toBe("68.87");
    expect(text(first, ".brier")).toBe("0.022");
    expect(text(first, ".drs")).toBe("58.11");
  });

  it("carries every API value verbatim in data-raw", async () => {
    const root = await mount();
    const rows = [...root.querySelectorAll("table.leaderboard tbody tr")];
    LEADERBOARD_FINAL.rows.forEach((fixture, i) => {
      const row = rows[i];
      expect(row.getAttribute("data-team")).toBe(fixture.team_id);
      expect(raw(row, ".overall-rank")).toBe(JSON.stringify(fixture.overall_rank));
      expect(raw(row, ".rank-detection")).toBe(JSON.stringify(fixture.rank_detection));
      expect(raw(row, ".rank-calibration")).toBe(JSON.stringify(fixture.rank_calibration));
      expect(raw(row, ".rank-robustness")).toBe(JSON.stringify(fixture.rank_robustness));
      expect(raw(row, ".map")).toBe(JSON.stringify(fixture.map_mean));
      expect(raw(row, ".brier")).toBe(JSON.stringify(fixture.brier_mean));
      expect(raw(row, ".drs")).toBe(JSON.stringify(fixture.drs_mean));
    });
  });

  it("styles the unranked baseline row distinctly, after the ranked rows", async () => {
    const root = await mount();
    const rows = [...root.querySelectorAll("table.leaderboard tbody tr")];
    const baseline = rows[rows.length - 1];

    expect(baseline.classList.contains("baseline")).toBe(true);
    expect(rows.slice(0, -1).some((row) => row.classList.contains("baseline"))).toBe(false);
    expect(text(baseline, ".team-id")).toBe("LG-DG (baseline)");
    for (const cls of [".overall-rank", ".rank-detection", ".rank-calibration", ".rank-robustness"]) {
      expect(text(baseline, cls)).toBe("n/a");
      expect(raw(baseline, cls)).toBe("null");
    }
    expect(text(baseline, ".map")).toBe("59.05");
  });

  it("keeps the API ordering for tied rows instead of re-sorting", async () => {
    const root = await mount({ leaderboard: LEADERBOARD_TIE });
    const ids = [...root.querySelectorAll("table.leaderboard tbody tr .team-id")].map(
      (node) => node.textContent,
    );
    expect(ids).toEqual(["north-star", "zeta-lab", "alpha-lab", "south-pole"]);
  });

  it("shows an empty state when nothing is scored", async () => {
    const root = await mount({ leaderboard: LEADERBOARD_EMPTY });
    const panel = root.querySelector(".leaderboard-panel");
    expect(panel?.querySelector(".empty")?.textContent).toBe("no submissions scored yet");
    expect(panel?.querySelector("table.leaderboard")).toBeNull();
  });

  it("raises a schema banner on a malformed payload, leaving other panels up", async () => {
    const root = await mount({ leaderboard: LEADERBOARD_MALFORMED });
    const panel = root.querySelector(".leaderboard-panel");
    expect(panel?.querySelector(".banner.error")?.textContent).toContain("unexpected API payload");
    expect(panel?.querySelector("table.leaderboard")).toBeNull();
    expect(text(root, '.funnel-panel dd[data-stage="contacted"]')).toBe("106");
  });

  it("plots the robustness scatter with the raw coordinates attached", async () => {
    const root = await mount();
    const points = root.querySelectorAll("svg.scatter circle.scatter-point");
    expect(points).toHaveLength(3);
    const theator = root.querySelector('circle.scatter-point[data-team="theator"]');
    expect(theator?.getAttribute("data-mean")).toBe("0.5811");
    expect(theator?.getAttribute("data-std")).toBe("0.041");
    expect(text(root, ".scatter-wrap figcaption")).toBe("robustness mean vs std");
  });
});

describe("funnel and coverage", () => {
  it("shows each funnel stage count verbatim", async () => {
    const root = await mount();
    const stages: [string, string][] = [
      ["contacted", "106"],
      ["eligible", "71"],
      ["exam taken", "67"],
      ["exam passed", "27"],
      ["qualified", "20"],
      ["dropped", "77"],
    ];
    for (const [stage, count] of stages) {
      expect(text(root, `.funnel-panel dd[data-stage="${stage}"]`)).toBe(count);
      expect(raw(root, `.funnel-panel dd[data-stage="${stage}"]`)).toBe(count);
    }
    expect(text(root, '.annotator-states li[data-state="ACTIVE"]')).toBe("ACTIVE: 18");
    expect(text(root, '.annotator-states li[data-state="DROPPED"]')).toBe("DROPPED: 2");
  });

  it("shows the coverage histogram per ratings-received bucket", async () => {
    const root = await mount();
    expect(text(root, ".coverage-panel .clip-total")).toBe("100");
    expect(raw(root, ".coverage-panel .clip-total")).toBe("100");
    expect(text(root, ".coverage-panel .fully-annotated")).toBe("40");
    const buckets: [string, string][] = [
      ["0", "10"],
      ["1", "20"],
      ["2", "30"],
      ["3", "40"],
    ];
    for (const [load, count] of buckets) {
      expect(text(root, `.bar-count[data-load="${load}"]`)).toBe(count);
      expect(raw(root, `.bar-count[data-load="${load}"]`)).toBe(count);
    }
    expect(root.querySelectorAll(".coverage-panel .bar-row")).toHaveLength(4);
  });
});

describe("overdue", () => {
  it("lists each overdue assignment with annotator, clip and due date", async () => {
    const root = await mount();
    const rows = [...root.querySelectorAll("table.overdue tbody tr")];
    expect(rows).toHaveLength(2);
    expect(rows[0].getAttribute("data-clip")).toBe("clip-0003");
    expect(rows[0].getAttribute("data-annotator")).toBe("ann-007");
    const cells = [...rows[0].querySelectorAll("td")].map((td) => td.textContent);
    expect(cells).toEqual(["ann-007", "clip-0003", "2026-03-12T09:00:00+00:00"]);
    expect(rows[1].getAttribute("data-annotator")).toBe("ann-004");
  });

  it("shows an empty state when nothing is overdue", async () => {
    const root = await mount({ overdue: [] });
    expect(text(root, ".overdue-panel .empty")).toBe("nothing overdue");
  });
});

describe("layout", () => {
  it("mounts the four panels in a fixed order", async () => {
    const root = await mount();
    const classes = [...root.querySelectorAll("section.dashboard > section.panel")].map(
      (panel) => panel.className,
    );
    expect(classes).toEqual([
      "panel funnel-panel",
      "panel coverage-panel",
      "panel overdue-panel",
      "panel leaderboard-panel",
    ]);
  });
});

/**
 * Organizer dashboard: funnel, coverage, overdue assignments, leaderboard,
 * robustness scatter.
 *
 * The client computes no metric, rank, or ordering. Rows render in the
 * order the API sent them and every number is the API's value; the only
 * transformation is display formatting, and each formatted cell carries
 * the raw value in a data attribute.
 */

import {
  AssignmentDto,
  ConsoleApi,
  CoverageDto,
  FunnelDto,
  LeaderboardDto,
  LeaderboardRowDto,
  SchemaError,
} from "./api.js";
import { clear, el } from "./dom.js";

function banner(message: string): HTMLElement {
  return el("p", { class: "banner error" }, message);
}

function describe(error: unknown): string {
  if (error instanceof SchemaError) return `unexpected API payload. ${error.message}`;
  return error instanceof Error ? error.message : String(error);
}

/** Percent display of a 0..1 score, e.g. 0.6887 -> "68.87". */
function percent(value: number): string {
  return (100 * value).toFixed(2);
}

function scoreCell(value: number | null, raw: number | null, cls: string): HTMLElement {
  const td = el("td", { class: cls, "data-raw": JSON.stringify(raw) });
  td.textContent = value === null ? "n/a" : percent(value);
  return td;
}

function rankCell(rank: number | null, cls: string): HTMLElement {
  const td = el("td", { class: cls, "data-raw": JSON.stringify(rank) });
  td.textContent = rank === null ? "n/a" : String(rank);
  return td;
}

export function renderFunnel(data: FunnelDto): HTMLElement {
  const dl = el("dl", { class: "funnel" });
  const stages: [string, number][] = [
    ["contacted", data.contacted],
    ["eligible", data.eligible],
    ["exam taken", data.exam_taken],
    ["exam passed", data.passed],
    ["qualified", data.qualified],
    ["dropped", data.dropped],
  ];
  for (const [label, count] of stages) {
    dl.append(
      el("dt", {}, label),
      el("dd", { "data-stage": label, "data-raw": String(count) }, String(count)),
    );
  }
  const states = el("ul", { class: "annotator-states" });
  for (const state of Object.keys(data.current_states)) {
    states.append(
      el(
        "li",
        { "data-state": state },
        `${state}: ${data.current_states[state]}`,
      ),
    );
  }
  return el("section", { class: "panel funnel-panel" }, el("h3", {}, "recruitment funnel"), dl, states);
}

export function renderCoverage(data: CoverageDto): HTMLElement {
  const counts = Object.keys(data.histogram)
    .sort()
    .map((k) => data.histogram[k]);
  const max = Math.max(1, ...counts);
  const bars = el("div", { class: "histogram" });
  for (const load of Object.keys(data.histogram).sort()) {
    const count = data.histogram[load];
    bars.append(
      el(
        "div",
        { class: "bar-row" },
        el("span", { class: "bar-label" }, `${load}/3`),
        el("span", {
          class: "bar",
          style: `width:${(100 * count) / max}%`,
        }),
        el("span", { class: "bar-count", "data-load": load, "data-raw": String(count) }, String(count)),
      ),
    );
  }
  return el(
    "section",
    { class: "panel coverage-panel" },
    el("h3", {}, "coverage"),
    el(
      "p",
      {},
      el("span", { class: "clip-total", "data-raw": String(data.clips) }, String(data.clips)),
      " clips, ",
      el(
        "span",
        { class: "fully-annotated", "data-raw": String(data.fully_annotated) },
        String(data.fully_annotated),
      ),
      " fully annotated",
    ),
    bars,
  );
}

export function renderOverdue(rows: AssignmentDto[]): HTMLElement {
  const panel = el("section", { class: "panel overdue-panel" }, el("h3", {}, "overdue assignments"));
  if (rows.length === 0) {
    panel.append(el("p", { class: "empty" }, "nothing overdue"));
    return panel;
  }
  const body = el("tbody", {});
  for (const row of rows) {
    body.append(
      el(
        "tr",
        { "data-clip": row.clip_id, "data-annotator": row.annotator_id },
        el("td", {}, row.annotator_id),
        el("td", {}, row.clip_id),
        el("td", {}, row.due_at),
      ),
    );
  }
  panel.append(
    el(
      "table",
      { class: "overdue" },
      el(
        "thead",
        {},
        el("tr", {}, el("th", {}, "annotator"), el("th", {}, "clip"), el("th", {}, "due")),
      ),
      body,
    ),
  );
  return panel;
}

function leaderboardRow(row: LeaderboardRowDto): HTMLElement {
  const ranked = row.overall_rank !== null;
  const tr = el("tr", {
    class: ranked ? "team" : "team baseline",
    "data-team": row.team_id,
  });
  tr.append(rankCell(row.overall_rank, "overall-rank"));
  tr.append(el("td", { class: "team-id" }, row.team_id + (ranked ? "" : " (baseline)")));
  tr.append(rankCell(row.rank_detection, "rank-detection"));
  tr.append(rankCell(row.rank_calibration, "rank-calibration"));
  tr.append(rankCell(row.rank_robustness, "rank-robustness"));
  tr.append(scoreCell(row.map_mean, row.map_mean, "map"));
  const brier = el("td", { class: "brier", "data-raw": JSON.stringify(row.brier_mean) });
  brier.textContent = row.brier_mean.toFixed(3);
  tr.append(brier);
  tr.append(scoreCell(row.drs_mean, row.drs_mean, "drs"));
  return tr;
}

export function renderLeaderboard(data: LeaderboardDto): HTMLElement {
  const panel = el("section", { class: "panel leaderboard-panel" }, el("h3", {}, "leaderboard"));
  if (data.rows.length === 0) {
    panel.append(el("p", { class: "empty" }, "no submissions scored yet"));
    return panel;
  }
  const body = el("tbody", {});
  for (const row of data.rows) {
    body.append(leaderboardRow(row));
  }
  panel.append(
    el(
      "table",
      { class: "leaderboard" },
      el(
        "thead",
        {},
        el(
          "tr",
          {},
          el("th", {}, "overall"),
          el("th", {}, "team"),
          el("th", {}, "detection"),
          el("th", {}, "calibration"),
          el("th", {}, "robustness"),
          el("th", {}, "mAP"),
          el("th", {}, "Brier"),
          el("th", {}, "DRS"),
        ),
      ),
      body,
    ),
  );
  if (data.scatter.length > 0) {
    panel.append(renderScatter(data));
  }
  return panel;
}

/** Mean vs standard deviation of each team's per-variant robustness scores.
 * Coordinates are presentation scaling only; the raw numbers ride along as
 * data attributes. */
function renderScatter(data: LeaderboardDto): HTMLElement {
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("class", "scatter");
  svg.setAttribute("viewBox", "0 0 110 110");
  const maxStd = Math.max(0.01, ...data.scatter.map((p) => p.std));
  for (const point of data.scatter) {
    const circle = document.createElementNS("http://www.w3.org/2000/svg", "circle");
    circle.setAttribute("class", "scatter-point");
    circle.setAttribute("data-team", point.team_id);
    circle.setAttribute("data-mean", String(point.mean));
    circle.setAttribute("data-std", String(point.std));
    circle.setAttribute("cx", String(5 + 100 * point.mean));
    circle.setAttribute("cy", String(105 - (100 * point.std) / maxStd));
    circle.setAttribute("r", "2");
    const title = document.createElementNS("http://www.w3.org/2000/svg", "title");
    title.textContent = point.team_id;
    circle.append(title);
    svg.append(circle);
  }
  const wrap = el("figure", { class: "scatter-wrap" });
  wrap.append(svg, el("figcaption", {}, "robustness mean vs std"));
  return wrap;
}

/** Mount all four panels; each loads independently so one failing endpoint
 * leaves the rest of the dashboard usable. */
export async function renderDashboard(root: HTMLElement, api: ConsoleApi): Promise<void> {
  clear(root);
  const section = el("section", { class: "dashboard" }, el("h2", {}, "organizer dashboard"));
  root.append(section);

  const mounts: [string, () => Promise<HTMLElement>][] = [
    ["funnel", async () => renderFunnel(await api.funnel())],
    ["coverage", async () => renderCoverage(await api.coverage())],
    ["overdue", async () => renderOverdue(await api.overdue())],
    ["leaderboard", async () => renderLeaderboard(await api.leaderboard())],
  ];
  const panels = await Promise.all(
    mounts.map(async ([name, build]): Promise<HTMLElement> => {
      try {
        return await build();
      } catch (error) {
        return el(
          "section",
          { class: `panel ${name}-panel` },
          el("h3", {}, name),
          banner(describe(error)),
        );
      }
    }),
  );
  for (const panel of panels) {
    section.append(panel);
  }
}

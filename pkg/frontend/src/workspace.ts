/**
 * Annotator workspace: the rater's queue and the scoring form.
 *
 * Everything rendered here comes from the blinded assignment payload
 * (clip id, media URI, annotated frame indices). Provenance and other
 * raters' labels never reach this module, and it renders nothing it did
 * not receive.
 */

import {
  ApiError,
  AssessmentBody,
  AssignmentRowDto,
  ConsoleApi,
} from "./api.js";
import { clear, el } from "./dom.js";

/** Length of the clip stream shown for context; only the payload's
 * frame_indices are scored. */
export const STREAM_FRAMES = 90;

export const CRITERIA = ["C1", "C2", "C3"] as const;

const CONFIDENCE_STEP = 0.05;

/** Snap a slider value to the 0.05 grid, clamped to [0, 1]. */
export function snapConfidence(value: number): number {
  const snapped = Math.round(value / CONFIDENCE_STEP) * CONFIDENCE_STEP;
  return Number(Math.min(1, Math.max(0, snapped)).toFixed(2));
}

function idempotencyKey(annotatorId: string, clipId: string): string {
  const storageKey = `cvsops-idem:${annotatorId}/${clipId}`;
  try {
    const existing = sessionStorage.getItem(storageKey);
    if (existing) return existing;
    const fresh = newKey();
    sessionStorage.setItem(storageKey, fresh);
    return fresh;
  } catch {
    return newKey();
  }
}

function newKey(): string {
  if (typeof crypto !== "undefined" && "randomUUID" in crypto) {
    return crypto.randomUUID();
  }
  return `key-${Date.now()}-${Math.random().toString(36).slice(2)}`;
}

type CellValue = 1 | 0 | null;

/** One scoring form; owns its state and DOM subtree. */
export class AssessmentForm {
  readonly element: HTMLElement;

  private readonly grid: CellValue[][];
  private confidence: number | null = null;
  private readonly videoLevel: boolean[] = [false, false, false];
  private submitted = false;
  private inFlight = false;

  private readonly submitButton: HTMLButtonElement;
  private readonly hint: HTMLElement;
  private readonly errorBox: HTMLElement;
  private readonly status: HTMLElement;

  constructor(
    private readonly row: AssignmentRowDto,
    private readonly api: ConsoleApi,
    private readonly onSaved: (clipId: string) => void,
  ) {
    const frames = row.clip.frame_indices;
    this.grid = frames.map(() => [null, null, null]);

    this.submitButton = el("button", { class: "submit", type: "button" }, "Submit assessment");
    this.submitButton.addEventListener("click", () => void this.submit());
    this.hint = el("p", { class: "hint" });
    this.errorBox = el("p", { class: "form-error", hidden: "" });
    this.status = el("span", { class: "status" });

    this.element = el(
      "form",
      { class: "assessment-form", "data-clip": row.clip.clip_id },
      el(
        "header",
        {},
        el("h3", {}, row.clip.clip_id),
        el("a", { class: "media", href: row.clip.media_uri }, row.clip.media_uri),
        el("span", { class: "due" }, `due ${row.assignment.due_at}`),
      ),
      this.renderStream(frames),
      this.renderGrid(frames),
      this.renderVideoLevel(),
      this.renderConfidence(),
      el("footer", {}, this.submitButton, this.status),
      this.hint,
      this.errorBox,
    );
    this.element.addEventListener("submit", (event) => event.preventDefault());
    this.refresh();
  }

  /** The 90-frame stream, context only; scored frames are highlighted. */
  private renderStream(frames: number[]): HTMLElement {
    const annotated = new Set(frames);
    const strip = el("div", { class: "stream", role: "presentation" });
    for (let i = 0; i < STREAM_FRAMES; i++) {
      strip.append(
        el("span", {
          class: annotated.has(i) ? "tick annotated" : "tick",
          "data-frame": String(i),
        }),
      );
    }
    return strip;
  }

  private renderGrid(frames: number[]): HTMLElement {
    const head = el(
      "tr",
      {},
      el("th", {}, "frame"),
      ...CRITERIA.map((c) => el("th", {}, c)),
    );
    const body = el("tbody", {});
    frames.forEach((frameIndex, rowIdx) => {
      const tr = el("tr", {}, el("th", {}, String(frameIndex)));
      for (let k = 0; k < CRITERIA.length; k++) {
        const cell = el("button", {
          class: "cell",
          type: "button",
          "data-frame": String(frameIndex),
          "data-criterion": CRITERIA[k],
          "data-value": "unset",
        });
        cell.textContent = "·";
        cell.addEventListener("click", () => this.cycleCell(cell, rowIdx, k));
        tr.append(el("td", {}, cell));
      }
      body.append(tr);
    });
    return el("table", { class: "grid" }, el("thead", {}, head), body);
  }

  private cycleCell(cell: HTMLButtonElement, rowIdx: number, k: number): void {
    if (this.submitted || this.inFlight) return;
    const next: CellValue = this.grid[rowIdx][k] === 1 ? 0 : 1;
    this.grid[rowIdx][k] = next;
    cell.dataset.value = String(next);
    cell.textContent = next === 1 ? "✓" : "✗";
    this.refresh();
  }

  private renderVideoLevel(): HTMLElement {
    const wrap = el("fieldset", { class: "video-level" }, el("legend", {}, "achieved at video level"));
    CRITERIA.forEach((criterion, k) => {
      const box = el("input", {
        type: "checkbox",
        class: "video-toggle",
        "data-criterion": criterion,
      });
      box.addEventListener("change", () => {
        this.videoLevel[k] = (box as HTMLInputElement).checked;
        this.refresh();
      });
      wrap.append(el("label", {}, box, ` ${criterion}`));
    });
    return wrap;
  }

  private renderConfidence(): HTMLElement {
    const slider = el("input", {
      type: "range",
      class: "confidence",
      min: "0",
      max: "1",
      step: String(CONFIDENCE_STEP),
      value: "0.5",
    });
    const readout = el("output", { class: "confidence-value" }, "not set");
    slider.addEventListener("input", () => {
      this.confidence = snapConfidence(Number((slider as HTMLInputElement).value));
      (slider as HTMLInputElement).value = String(this.confidence);
      readout.textContent = this.confidence.toFixed(2);
      this.refresh();
    });
    return el("label", { class: "confidence-row" }, "confidence ", slider, readout);
  }

  private missing(): string[] {
    const problems: string[] = [];
    const unset = this.grid.flat().filter((v) => v === null).length;
    if (unset > 0) problems.push(`${unset} frame cells unscored`);
    if (this.confidence === null) problems.push("confidence not set");
    CRITERIA.forEach((criterion, k) => {
      if (this.videoLevel[k] && !this.grid.some((row) => row[k] === 1)) {
        problems.push(`video-level ${criterion} needs a positive frame`);
      }
    });
    return problems;
  }

  private refresh(): void {
    const problems = this.missing();
    const ready = problems.length === 0 && !this.submitted && !this.inFlight;
    this.submitButton.disabled = !ready;
    this.hint.textContent = this.submitted ? "" : problems.join("; ");
  }

  private body(): AssessmentBody {
    return {
      clip_id: this.row.clip.clip_id,
      annotator_id: this.row.assignment.annotator_id,
      frame_labels: this.grid.map((row) => row.map((v) => v ?? 0)),
      confidence: this.confidence ?? 0,
      video_level: this.videoLevel.map((v) => (v ? 1 : 0)),
    };
  }

  async submit(): Promise<void> {
    if (this.submitted || this.inFlight || this.missing().length > 0) return;
    // Optimistic: lock the form and report progress immediately; a rejection
    // below rolls this back.
    this.inFlight = true;
    this.errorBox.setAttribute("hidden", "");
    this.errorBox.textContent = "";
    this.status.textContent = "saving";
    this.refresh();
    const key = idempotencyKey(this.row.assignment.annotator_id, this.row.clip.clip_id);
    try {
      await this.api.submitAssessment(this.body(), key);
      this.inFlight = false;
      this.submitted = true;
      this.status.textContent = "saved";
      this.refresh();
      this.onSaved(this.row.clip.clip_id);
    } catch (error) {
      this.inFlight = false;
      this.status.textContent = "";
      this.errorBox.textContent =
        error instanceof ApiError ? error.message : "submission failed, try again";
      this.errorBox.removeAttribute("hidden");
      this.refresh();
    }
  }
}

/** Mount the workspace: the queue on the left, one form at a time. */
export async function renderWorkspace(
  root: HTMLElement,
  api: ConsoleApi,
  annotatorId: string,
): Promise<void> {
  clear(root);
  let rows: AssignmentRowDto[];
  try {
    rows = await api.assignments(annotatorId);
  } catch (error) {
    root.append(
      el("p", { class: "banner error" }, `could not load assignments: ${describe(error)}`),
    );
    return;
  }

  const formArea = el("section", { class: "form-area" });
  const queue = el("ul", { class: "queue" });
  const done = new Set<string>();

  const openForm = (row: AssignmentRowDto) => {
    clear(formArea);
    const form = new AssessmentForm(row, api, (clipId) => {
      done.add(clipId);
      const item = queue.querySelector(`li[data-clip="${clipId}"]`);
      item?.classList.add("done");
    });
    formArea.append(form.element);
  };

  if (rows.length === 0) {
    formArea.append(el("p", { class: "empty" }, "no open assignments"));
  } else {
    for (const row of rows) {
      const item = el(
        "li",
        { "data-clip": row.clip.clip_id },
        el("span", { class: "clip" }, row.clip.clip_id),
        el("span", { class: "due" }, `due ${row.assignment.due_at}`),
      );
      item.addEventListener("click", () => {
        if (!done.has(row.clip.clip_id)) openForm(row);
      });
      queue.append(item);
    }
    openForm(rows[0]);
  }

  root.append(
    el(
      "section",
      { class: "workspace" },
      el("h2", {}, `workspace: ${annotatorId}`),
      el("div", { class: "columns" }, el("nav", {}, queue), formArea),
    ),
  );
}

function describe(error: unknown): string {
  return error instanceof Error ? error.message : String(error);
}

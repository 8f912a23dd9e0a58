/**
 * Typed client for the cvsops HTTP API.
 *
 * Everything shown in the console comes through here verbatim. The decoders
 * check shape only; they never reorder rows or derive values, so whatever
 * the API said is what the views get.
 */

export interface ConsoleConfig {
  /** Base URL of the API, e.g. "http://127.0.0.1:8400". Empty for same-origin. */
  baseUrl: string;
  /** Bearer token; omit when the server runs without one. */
  token?: string;
}

export interface AssignmentDto {
  annotator_id: string;
  clip_id: string;
  tick_id: number;
  issued_at: string;
  due_at: string;
}

/** The blinded clip payload. These three fields are all a rater may see. */
export interface BlindClipDto {
  clip_id: string;
  media_uri: string;
  frame_indices: number[];
}

export interface AssignmentRowDto {
  assignment: AssignmentDto;
  clip: BlindClipDto;
}

export interface FunnelDto {
  contacted: number;
  eligible: number;
  exam_taken: number;
  passed: number;
  qualified: number;
  dropped: number;
  current_states: Record<string, number>;
}

export interface CoverageDto {
  clips: number;
  histogram: Record<string, number>;
  fully_annotated: number;
}

export interface LeaderboardRowDto {
  team_id: string;
  /** null marks an unranked row (a baseline shown for reference only). */
  overall_rank: number | null;
  rank_detection: number | null;
  rank_calibration: number | null;
  rank_robustness: number | null;
  map_mean: number | null;
  brier_mean: number;
  drs_mean: number | null;
}

export interface ScatterPointDto {
  team_id: string;
  mean: number;
  std: number;
}

export interface LeaderboardDto {
  rows: LeaderboardRowDto[];
  scatter: ScatterPointDto[];
}

export interface AssessmentBody {
  clip_id: string;
  annotator_id: string;
  frame_labels: number[][];
  confidence: number;
  video_level: number[];
}

export interface SubmitResult {
  clip_id: string;
  annotator_id: string;
  clip_completed: boolean;
}

/** Non-2xx response, with the server's detail message when it sent one. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

/** A response that does not match the documented payload shape. */
export class SchemaError extends Error {
  constructor(path: string, expected: string, got: unknown) {
    super(`${path}: expected ${expected}, got ${JSON.stringify(got)}`);
    this.name = "SchemaError";
  }
}

// ---------------------------------------------------------------------------
// decoders

function isRecord(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

function str(v: unknown, path: string): string {
  if (typeof v !== "string") throw new SchemaError(path, "string", v);
  return v;
}

function num(v: unknown, path: string): number {
  if (typeof v !== "number" || Number.isNaN(v)) throw new SchemaError(path, "number", v);
  return v;
}

function numOrNull(v: unknown, path: string): number | null {
  if (v === null || v === undefined) return null;
  return num(v, path);
}

function obj(v: unknown, path: string): Record<string, unknown> {
  if (!isRecord(v)) throw new SchemaError(path, "object", v);
  return v;
}

function arr(v: unknown, path: string): unknown[] {
  if (!Array.isArray(v)) throw new SchemaError(path, "array", v);
  return v;
}

function counts(v: unknown, path: string): Record<string, number> {
  const raw = obj(v, path);
  const out: Record<string, number> = {};
  for (const key of Object.keys(raw)) out[key] = num(raw[key], `${path}.${key}`);
  return out;
}

function decodeAssignment(v: unknown, path: string): AssignmentDto {
  const d = obj(v, path);
  return {
    annotator_id: str(d.annotator_id, `${path}.annotator_id`),
    clip_id: str(d.clip_id, `${path}.clip_id`),
    tick_id: num(d.tick_id, `${path}.tick_id`),
    issued_at: str(d.issued_at, `${path}.issued_at`),
    due_at: str(d.due_at, `${path}.due_at`),
  };
}

function decodeBlindClip(v: unknown, path: string): BlindClipDto {
  const d = obj(v, path);
  return {
    clip_id: str(d.clip_id, `${path}.clip_id`),
    media_uri: str(d.media_uri, `${path}.media_uri`),
    frame_indices: arr(d.frame_indices, `${path}.frame_indices`).map((x, i) =>
      num(x, `${path}.frame_indices[${i}]`),
    ),
  };
}

export function decodeAssignmentRows(v: unknown): AssignmentRowDto[] {
  return arr(v, "assignments").map((row, i) => {
    const d = obj(row, `assignments[${i}]`);
    return {
      assignment: decodeAssignment(d.assignment, `assignments[${i}].assignment`),
      clip: decodeBlindClip(d.clip, `assignments[${i}].clip`),
    };
  });
}

export function decodeFunnel(v: unknown): FunnelDto {
  const d = obj(v, "funnel");
  return {
    contacted: num(d.contacted, "funnel.contacted"),
    eligible: num(d.eligible, "funnel.eligible"),
    exam_taken: num(d.exam_taken, "funnel.exam_taken"),
    passed: num(d.passed, "funnel.passed"),
    qualified: num(d.qualified, "funnel.qualified"),
    dropped: num(d.dropped, "funnel.dropped"),
    current_states: counts(d.current_states, "funnel.current_states"),
  };
}

export function decodeCoverage(v: unknown): CoverageDto {
  const d = obj(v, "coverage");
  return {
    clips: num(d.clips, "coverage.clips"),
    histogram: counts(d.histogram, "coverage.histogram"),
    fully_annotated: num(d.fully_annotated, "coverage.fully_annotated"),
  };
}

export function decodeOverdue(v: unknown): AssignmentDto[] {
  return arr(v, "overdue").map((row, i) => decodeAssignment(row, `overdue[${i}]`));
}

export function decodeLeaderboard(v: unknown): LeaderboardDto {
  const d = obj(v, "leaderboard");
  const rows = arr(d.rows, "leaderboard.rows").map((row, i): LeaderboardRowDto => {
    const path = `leaderboard.rows[${i}]`;
    const r = obj(row, path);
    return {
      team_id: str(r.team_id, `${path}.team_id`),
      overall_rank: numOrNull(r.overall_rank, `${path}.overall_rank`),
      rank_detection: numOrNull(r.rank_detection, `${path}.rank_detection`),
      rank_calibration: numOrNull(r.rank_calibration, `${path}.rank_calibration`),
      rank_robustness: numOrNull(r.rank_robustness, `${path}.rank_robustness`),
      map_mean: numOrNull(r.map_mean, `${path}.map_mean`),
      brier_mean: num(r.brier_mean, `${path}.brier_mean`),
      drs_mean: numOrNull(r.drs_mean, `${path}.drs_mean`),
    };
  });
  const scatter = arr(d.scatter, "leaderboard.scatter").map((row, i): ScatterPointDto => {
    const path = `leaderboard.scatter[${i}]`;
    const p = obj(row, path);
    return {
      team_id: str(p.team_id, `${path}.team_id`),
      mean: num(p.mean, `${path}.mean`),
      std: num(p.std, `${path}.std`),
    };
  });
  return { rows, scatter };
}

// ---------------------------------------------------------------------------
// client

export class ConsoleApi {
  constructor(
    private readonly config: ConsoleConfig,
    private readonly fetchImpl: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request(
    method: string,
    path: string,
    body?: unknown,
    idempotencyKey?: string,
  ): Promise<unknown> {
    const headers: Record<string, string> = { Accept: "application/json" };
    if (this.config.token) headers.Authorization = `Bearer ${this.config.token}`;
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (idempotencyKey !== undefined) headers["Idempotency-Key"] = idempotencyKey;
    const response = await this.fetchImpl(this.config.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json().catch(() => ({}));
    if (!response.ok) {
      const detail =
        isRecord(payload) && typeof payload.detail === "string"
          ? payload.detail
          : `HTTP ${response.status}`;
      throw new ApiError(response.status, detail);
    }
    return payload;
  }

  async assignments(annotatorId: string): Promise<AssignmentRowDto[]> {
    const query = new URLSearchParams({ annotator_id: annotatorId });
    return decodeAssignmentRows(await this.request("GET", `/assignments?${query}`));
  }

  async funnel(): Promise<FunnelDto> {
    return decodeFunnel(await this.request("GET", "/funnel"));
  }

  async coverage(): Promise<CoverageDto> {
    return decodeCoverage(await this.request("GET", "/coverage"));
  }

  async overdue(): Promise<AssignmentDto[]> {
    return decodeOverdue(await this.request("GET", "/assignments/overdue"));
  }

  async leaderboard(): Promise<LeaderboardDto> {
    return decodeLeaderboard(await this.request("GET", "/leaderboard"));
  }

  async submitAssessment(body: AssessmentBody, idempotencyKey: string): Promise<SubmitResult> {
    const raw = obj(await this.request("POST", "/assessments", body, idempotencyKey), "submit");
    return {
      clip_id: str(raw.clip_id, "submit.clip_id"),
      annotator_id: str(raw.annotator_id, "submit.annotator_id"),
      clip_completed: Boolean(raw.clip_completed),
    };
  }
}

/**
 * Contract fixtures.
 *
 * PROVENANCE holds strings that exist platform-side for the fixture clips
 * (hospital, vendor, country, surgeon). The API never sends them to the
 * workspace, and the blinding test asserts none of them can be found in
 * the rendered DOM.
 *
 * LEADERBOARD_FINAL mirrors the final reference leaderboard: 13 ranked
 * teams in published order plus the unranked baseline row.
 */

import type {
  AssignmentDto,
  AssignmentRowDto,
  CoverageDto,
  FunnelDto,
  LeaderboardDto,
} from "../src/api.js";

export const PROVENANCE = {
  center: "Riverton General Hospital",
  country: "Norway",
  device_vendor: "Acme Scopes",
  surgeon: "surgeon-042",
} as const;

export const ANNOTATED_FRAMES = [
  0, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60, 65, 70, 75, 80, 85,
];

function assignment(clipId: string, due: string): AssignmentDto {
  return {
    annotator_id: "ann-007",
    clip_id: clipId,
    tick_id: 3,
    issued_at: "2026-03-19T09:00:00+00:00",
    due_at: due,
  };
}

export function assignmentRows(): AssignmentRowDto[] {
  return [
    {
      assignment: assignment("clip-0007", "2026-04-02T09:00:00+00:00"),
      clip: {
        clip_id: "clip-0007",
        media_uri: "media://clips/clip-0007",
        frame_indices: [...ANNOTATED_FRAMES],
      },
    },
    {
      assignment: assignment("clip-0011", "2026-04-02T09:00:00+00:00"),
      clip: {
        clip_id: "clip-0011",
        media_uri: "media://clips/clip-0011",
        frame_indices: [...ANNOTATED_FRAMES],
      },
    },
  ];
}

export const FUNNEL: FunnelDto = {
  contacted: 106,
  eligible: 71,
  exam_taken: 67,
  passed: 27,
  qualified: 20,
  dropped: 77,
  current_states: { ACTIVE: 18, DROPPED: 2 },
};

export const COVERAGE: CoverageDto = {
  clips: 100,
  histogram: { "0": 10, "1": 20, "2": 30, "3": 40 },
  fully_annotated: 40,
};

export const OVERDUE: AssignmentDto[] = [
  assignment("clip-0003", "2026-03-12T09:00:00+00:00"),
  { ...assignment("clip-0019", "2026-03-12T09:00:00+00:00"), annotator_id: "ann-004" },
];

type Row = LeaderboardDto["rows"][number];

function ranked(
  team_id: string,
  overall: number,
  det: number,
  cal: number,
  rob: number,
  map: number,
  brier: number,
  drs: number,
): Row {
  return {
    team_id,
    overall_rank: overall,
    rank_detection: det,
    rank_calibration: cal,
    rank_robustness: rob,
    map_mean: map,
    brier_mean: brier,
    drs_mean: drs,
  };
}

/** The final reference standings, rows already in published overall order. */
export const LEADERBOARD_FINAL: LeaderboardDto = {
  rows: [
    ranked("theator", 1, 2, 1, 2, 0.6887, 0.022, 0.5811),
    ranked("SDS-HD", 2, 3, 3, 1, 0.688, 0.024, 0.5906),
    ranked("Farm", 3, 1, 9, 3, 0.6909, 0.058, 0.5771),
    ranked("Pandas", 4, 6, 2, 6, 0.615, 0.023, 0.5166),
    ranked("mmll", 5, 4, 7, 4, 0.6426, 0.044, 0.5633),
    ranked("TUE-VCA", 6, 5, 8, 5, 0.6289, 0.052, 0.5313),
    ranked("SRV-WEISS", 7, 9, 4, 10, 0.4891, 0.033, 0.4089),
    ranked("Ostrich", 8, 8, 10, 7, 0.5327, 0.086, 0.4924),
    ranked("FightTumor", 9, 7, 12, 8, 0.5478, 0.102, 0.4283),
    ranked("Transformers", 10, 11, 5, 11, 0.2003, 0.038, 0.1801),
    ranked("IRCV-URV", 11, 10, 11, 9, 0.4698, 0.101, 0.4138),
    ranked("CVS HUST", 12, 12, 6, 13, 0.1601, 0.043, 0.1165),
    ranked("HUFT-MedIA", 13, 13, 13, 12, 0.1429, 0.134, 0.1365),
    {
      team_id: "LG-DG",
      overall_rank: null,
      rank_detection: null,
      rank_calibration: null,
      rank_robustness: null,
      map_mean: 0.5905,
      brier_mean: 0.124,
      drs_mean: 0.5062,
    },
  ],
  scatter: [
    { team_id: "theator", mean: 0.5811, std: 0.041 },
    { team_id: "SDS-HD", mean: 0.5906, std: 0.037 },
    { team_id: "Farm", mean: 0.5771, std: 0.052 },
  ],
};

export const PUBLISHED_ORDER = [
  "theator",
  "SDS-HD",
  "Farm",
  "Pandas",
  "mmll",
  "TUE-VCA",
  "SRV-WEISS",
  "Ostrich",
  "FightTumor",
  "Transformers",
  "IRCV-URV",
  "CVS HUST",
  "HUFT-MedIA",
];

/** Two teams tied at overall rank 2, deliberately NOT in alphabetical
 * order: the client must keep the API's ordering as-is. */
export const LEADERBOARD_TIE: LeaderboardDto = {
  rows: [
    ranked("north-star", 1, 1, 2, 1, 0.71, 0.021, 0.62),
    ranked("zeta-lab", 2, 2, 1, 3, 0.66, 0.03, 0.55),
    ranked("alpha-lab", 2, 3, 3, 2, 0.64, 0.028, 0.57),
    ranked("south-pole", 3, 4, 4, 4, 0.5, 0.06, 0.42),
  ],
  scatter: [],
};

export const LEADERBOARD_EMPTY: LeaderboardDto = { rows: [], scatter: [] };

/** rows[0].team_id is a number: schema-invalid on purpose. */
export const LEADERBOARD_MALFORMED = {
  rows: [{ team_id: 42, overall_rank: 1 }],
  scatter: [],
};

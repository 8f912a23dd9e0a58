"""Scoring submitted predictions against the fused reference labels.

Three scoring tracks share one pooled-frame convention: predictions are
collected over the annotated frames of every clip in the evaluation set, per
criterion, and each track reduces that pool differently.

* Detection quality: average precision per criterion over the pooled frames
  (threshold sweep over the prediction scores), averaged across criteria.
* Calibration: the Brier score against the confidence-weighted soft labels,

      B = mean over cells of (p - y)^2.

* Robustness: the evaluation set is re-sliced into overlapping variant
  splits (imaging agents, approach, device, geography, rater confidence);
  the per-split mean APs are reduced by dropping the floor(n/10) worst
  splits and taking the minimum of the rest, so one catastrophic domain
  cannot hide inside an average but a single unlucky split does not decide
  the score either.

A separate causal audit replays clip prefixes through the predictor and
flags any frame whose prediction changes when the future is withheld.
"""

from __future__ import annotations

import json
import math
import queue
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol, Sequence

from .domain import ANNOTATED_FRAME_INDICES, CRITERIA, FRAME_COUNT
from .fusion import ClipRecord, FusedClip
from .util import round_half_up


class NoPositives(Exception):
    """Average precision is undefined when the pool has no positive labels."""


class MissingClip(Exception):
    """A submission lacks predictions for a clip in the evaluation set."""


class MissingFrame(Exception):
    """A clip's prediction rows do not cover every frame."""


class EmptyVariants(Exception):
    """The robustness reduction got an empty list of variant scores."""


class EmptySplit(Exception):
    """A variant split definition matched no clips."""


class ProtocolError(Exception):
    """A streaming predictor broke the line protocol."""


class PredictorTimeout(Exception):
    """A streaming predictor failed to answer before the deadline."""


_CRIT_KEYS = tuple(c.value for c in CRITERIA)


# ---------------------------------------------------------------------------
# Submissions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Submission:
    """One team's predictions: per clip, one probability triple per frame of
    the 90 s window (all 90 frames, although only annotated ones are scored)."""

    team_id: str
    predictions: Mapping[str, tuple[tuple[float, float, float], ...]]
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def validate(self, clip_ids: Iterable[str]) -> None:
        for cid in clip_ids:
            rows = self.predictions.get(cid)
            if rows is None:
                raise MissingClip(cid)
            if len(rows) != FRAME_COUNT:
                raise MissingFrame(f"{cid}: expected {FRAME_COUNT} rows, got {len(rows)}")
            for row in rows:
                if len(row) != 3 or not all(0.0 <= p <= 1.0 for p in row):
                    raise MissingFrame(f"{cid}: malformed probability row {row!r}")


def write_predictions(sub: Submission, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for cid in sorted(sub.predictions):
            fh.write(
                json.dumps(
                    {
                        "team_id": sub.team_id,
                        "clip_id": cid,
                        "frames": [list(row) for row in sub.predictions[cid]],
                    },
                    sort_keys=False,
                )
                + "\n"
            )


def read_predictions(path: str | Path) -> Submission:
    team_id: str | None = None
    preds: dict[str, tuple[tuple[float, float, float], ...]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            if team_id is None:
                team_id = d["team_id"]
            elif d["team_id"] != team_id:
                raise ProtocolError(
                    f"prediction file mixes teams: {team_id!r} and {d['team_id']!r}"
                )
            preds[d["clip_id"]] = tuple(tuple(float(p) for p in row) for row in d["frames"])
    if team_id is None:
        raise ProtocolError("empty prediction file")
    return Submission(team_id=team_id, predictions=preds)


# ---------------------------------------------------------------------------
# Core metrics
# ---------------------------------------------------------------------------


def average_precision(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the precision-recall step curve.

    Scores are swept from high to low; tied scores enter together as one
    group, and the precision after the group closes the recall interval the
    group opened:

        AP = sum over groups of (recall_after - recall_before) * precision_after
    """
    if len(scores) != len(labels):
        raise ValueError("scores and labels must align")
    positives = sum(labels)
    if positives == 0:
        raise NoPositives("no positive labels in pool")
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    ap = 0.0
    tp = 0
    seen = 0
    prev_recall = 0.0
    i = 0
    while i < len(order):
        j = i
        group_tp = 0
        while j < len(order) and scores[order[j]] == scores[order[i]]:
            group_tp += labels[order[j]]
            j += 1
        tp += group_tp
        seen += j - i
        recall = tp / positives
        precision = tp / seen
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j
    return ap


def _pooled_cells(
    sub: Submission,
    fused: Mapping[str, FusedClip],
    clip_ids: Sequence[str],
    criterion: int,
    soft: bool,
) -> tuple[list[float], list[float]]:
    scores: list[float] = []
    labels: list[float] = []
    for cid in clip_ids:
        if cid not in fused:
            raise MissingClip(cid)
        rows = sub.predictions.get(cid)
        if rows is None:
            raise MissingClip(cid)
        if len(rows) != FRAME_COUNT:
            raise MissingFrame(f"{cid}: expected {FRAME_COUNT} rows, got {len(rows)}")
        clip = fused[cid]
        for pos, frame_index in enumerate(ANNOTATED_FRAME_INDICES):
            scores.append(rows[frame_index][criterion])
            labels.append(
                clip.soft[pos][criterion] if soft else clip.mode[pos][criterion]
            )
    return scores, labels


@dataclass(frozen=True)
class MapResult:
    per_criterion: dict[str, float | None]
    mean: float | None
    flags: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "per_criterion": dict(self.per_criterion),
            "mean": self.mean,
            "flags": list(self.flags),
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "MapResult":
        return MapResult(
            per_criterion=dict(d["per_criterion"]),
            mean=d.get("mean"),
            flags=tuple(d.get("flags", ())),
        )


def map_score(
    sub: Submission, fused: Mapping[str, FusedClip], clip_ids: Sequence[str]
) -> MapResult:
    """Average precision per criterion over the pooled annotated frames of
    ``clip_ids``, and the mean over criteria. A criterion with no positive
    labels in the pool is excluded from the mean and flagged."""
    clip_ids = sorted(clip_ids)
    per: dict[str, float | None] = {}
    flags: list[str] = []
    for k, key in enumerate(_CRIT_KEYS):
        scores, labels = _pooled_cells(sub, fused, clip_ids, k, soft=False)
        try:
            per[key] = average_precision(scores, [int(v) for v in labels])
        except NoPositives:
            per[key] = None
            flags.append(key)
    defined = [v for v in per.values() if v is not None]
    return MapResult(
        per_criterion=per,
        mean=sum(defined) / len(defined) if defined else None,
        flags=tuple(flags),
    )


@dataclass(frozen=True)
class BrierResult:
    per_criterion: dict[str, float]
    mean: float

    def to_dict(self) -> dict[str, Any]:
        return {"per_criterion": dict(self.per_criterion), "mean": self.mean}

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "BrierResult":
        return BrierResult(per_criterion=dict(d["per_criterion"]), mean=float(d["mean"]))


def brier_score(
    sub: Submission, fused: Mapping[str, FusedClip], clip_ids: Sequence[str]
) -> BrierResult:
    """Mean squared distance between predicted probabilities and the soft
    labels, per criterion and averaged. Lower is better."""
    clip_ids = sorted(clip_ids)
    per: dict[str, float] = {}
    for k, key in enumerate(_CRIT_KEYS):
        scores, softs = _pooled_cells(sub, fused, clip_ids, k, soft=True)
        per[key] = sum((p - y) ** 2 for p, y in zip(scores, softs)) / len(scores)
    return BrierResult(per_criterion=per, mean=sum(per.values()) / len(per))


def domain_robustness_score(variant_scores: Sequence[float]) -> float:
    """Drop the floor(n/10) worst variant scores, then take the minimum of
    what remains (with ten variants: the second-worst score)."""
    values = sorted(variant_scores)
    if not values:
        raise EmptyVariants("no variant scores")
    return values[len(values) // 10]


# ---------------------------------------------------------------------------
# Variant splits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VariantSplitDef:
    """A declarative predicate over clip records: ``field op value``.

    Fields resolve against the provenance first, then the record itself,
    so both ``used_ioc`` and ``mean_confidence`` work. Ops: eq, in, lt, ge.
    """

    split_id: str
    field: str
    op: str
    value: Any

    def matches(self, record: ClipRecord) -> bool:
        if hasattr(record.provenance, self.field):
            actual = getattr(record.provenance, self.field)
        else:
            actual = getattr(record, self.field)
        if hasattr(actual, "value"):
            actual = actual.value
        if self.op == "eq":
            return actual == self.value
        if self.op == "in":
            return actual in self.value
        if self.op == "lt":
            return actual is not None and actual < self.value
        if self.op == "ge":
            return actual is not None and actual >= self.value
        raise ValueError(f"unknown op {self.op!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "split_id": self.split_id,
            "field": self.field,
            "op": self.op,
            "value": list(self.value) if isinstance(self.value, (list, tuple, set)) else self.value,
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "VariantSplitDef":
        value = d["value"]
        if isinstance(value, list):
            value = tuple(value)
        return VariantSplitDef(
            split_id=d["split_id"], field=d["field"], op=d["op"], value=value
        )


def _alternating_groups(counts: dict[str, int]) -> tuple[tuple[str, ...], tuple[str, ...]]:
    ranked = sorted(counts, key=lambda v: (-counts[v], v))
    return tuple(sorted(ranked[0::2])), tuple(sorted(ranked[1::2]))


def default_variant_splits(records: Sequence[ClipRecord]) -> list[VariantSplitDef]:
    """The standard ten variant splits: imaging agents, both approaches, two
    device-vendor groups, two country groups, and a confidence split.

    Vendor/country groups interleave values by frequency so both groups are
    populated whenever at least two distinct known values exist.
    """
    vendor_counts: dict[str, int] = {}
    country_counts: dict[str, int] = {}
    for r in records:
        if r.provenance.device_vendor:
            vendor_counts[r.provenance.device_vendor] = (
                vendor_counts.get(r.provenance.device_vendor, 0) + 1
            )
        if r.provenance.country:
            country_counts[r.provenance.country] = (
                country_counts.get(r.provenance.country, 0) + 1
            )
    vendors_a, vendors_b = _alternating_groups(vendor_counts)
    countries_a, countries_b = _alternating_groups(country_counts)
    return [
        VariantSplitDef("ioc", "used_ioc", "eq", True),
        VariantSplitDef("icg", "used_icg", "eq", True),
        VariantSplitDef("robotic", "approach", "eq", "ROBOTIC"),
        VariantSplitDef("laparoscopic", "approach", "eq", "LAPAROSCOPIC"),
        VariantSplitDef("device_group_a", "device_vendor", "in", vendors_a),
        VariantSplitDef("device_group_b", "device_vendor", "in", vendors_b),
        VariantSplitDef("country_group_a", "country", "in", countries_a),
        VariantSplitDef("country_group_b", "country", "in", countries_b),
        VariantSplitDef("low_confidence", "mean_confidence", "lt", 0.5),
        VariantSplitDef("high_confidence", "mean_confidence", "ge", 0.5),
    ]


def build_variant_splits(
    records: Sequence[ClipRecord], defs: Sequence[VariantSplitDef]
) -> dict[str, list[str]]:
    """Materialize split definitions into clip-id lists; a definition that
    matches nothing raises ``EmptySplit``."""
    out: dict[str, list[str]] = {}
    for d in defs:
        members = sorted(r.clip_id for r in records if d.matches(r))
        if not members:
            raise EmptySplit(d.split_id)
        out[d.split_id] = members
    return out


# ---------------------------------------------------------------------------
# Causal audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrameDescriptor:
    clip_id: str
    frame_index: int
    media_uri: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "clip_id": self.clip_id,
            "frame_index": self.frame_index,
            "media_uri": self.media_uri,
        }


class ClipPredictor(Protocol):
    def predict_clip(
        self, frames: Sequence[FrameDescriptor]
    ) -> Sequence[tuple[float, float, float]]: ...


DEFAULT_PROBES = (10, 45, 89)
CAUSAL_TOLERANCE = 1e-6


@dataclass(frozen=True)
class CausalViolation:
    probe_t: int
    frame_index: int
    criterion: str
    delta: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "probe_t": self.probe_t,
            "frame_index": self.frame_index,
            "criterion": self.criterion,
            "delta": self.delta,
        }


@dataclass(frozen=True)
class CausalAuditResult:
    passed: bool
    violation: CausalViolation | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "violation": self.violation.to_dict() if self.violation else None,
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "CausalAuditResult":
        violation = d.get("violation")
        return CausalAuditResult(
            passed=bool(d["passed"]),
            violation=CausalViolation(**violation) if violation else None,
        )


def causal_audit(
    predictor: ClipPredictor,
    frames: Sequence[FrameDescriptor],
    probes: Sequence[int] = DEFAULT_PROBES,
    tolerance: float = CAUSAL_TOLERANCE,
) -> CausalAuditResult:
    """Check that predictions do not depend on future frames.

    The predictor first sees the whole clip, then each probe prefix
    ``frames[:t+1]``; predictions for frames 0..t must match the full run
    within ``tolerance``. The first offending (probe, frame) is reported.
    """
    usable = [t for t in probes if 0 <= t < len(frames)]
    if not usable:
        raise ValueError("no usable probe positions for this clip length")
    full = _checked_rows(predictor.predict_clip(frames), len(frames))
    for t in usable:
        prefix = _checked_rows(predictor.predict_clip(frames[: t + 1]), t + 1)
        for f in range(t + 1):
            for k, key in enumerate(_CRIT_KEYS):
                delta = abs(prefix[f][k] - full[f][k])
                if delta > tolerance:
                    return CausalAuditResult(
                        passed=False,
                        violation=CausalViolation(
                            probe_t=t,
                            frame_index=frames[f].frame_index,
                            criterion=key,
                            delta=delta,
                        ),
                    )
    return CausalAuditResult(passed=True)


def _checked_rows(
    rows: Sequence[tuple[float, float, float]], expected: int
) -> Sequence[tuple[float, float, float]]:
    if len(rows) != expected:
        raise ProtocolError(f"predictor returned {len(rows)} rows, expected {expected}")
    return rows


class StreamingPredictor:
    """Adapter for out-of-process predictors speaking a line protocol.

    One frame descriptor is written per line; the predictor must answer with
    that frame's three probabilities (``{"C1": p, "C2": p, "C3": p}`` or a
    plain three-element array) before the next frame is sent. An answer that
    does not arrive before ``timeout_s`` raises ``PredictorTimeout`` (this is
    what a predictor that buffers frames looks like from outside); malformed
    answers raise ``ProtocolError``. A fresh process is started per clip run,
    so prefix probes never leak state between runs.
    """

    def __init__(self, argv: Sequence[str], timeout_s: float = 5.0):
        self.argv = list(argv)
        self.timeout_s = timeout_s

    def predict_clip(
        self, frames: Sequence[FrameDescriptor]
    ) -> list[tuple[float, float, float]]:
        proc = subprocess.Popen(
            self.argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
        )
        lines: "queue.Queue[str | None]" = queue.Queue()

        def _pump() -> None:
            assert proc.stdout is not None
            for line in proc.stdout:
                lines.put(line)
            lines.put(None)

        reader = threading.Thread(target=_pump, daemon=True)
        reader.start()
        rows: list[tuple[float, float, float]] = []
        try:
            assert proc.stdin is not None
            for desc in frames:
                proc.stdin.write(json.dumps(desc.to_dict(), sort_keys=False) + "\n")
                proc.stdin.flush()
                try:
                    line = lines.get(timeout=self.timeout_s)
                except queue.Empty:
                    raise PredictorTimeout(
                        f"no reply for frame {desc.frame_index} within {self.timeout_s}s"
                    )
                if line is None:
                    raise ProtocolError("predictor closed its output mid-clip")
                rows.append(self._parse_reply(line))
            proc.stdin.close()
        finally:
            proc.kill()
            proc.wait()
        return rows

    @staticmethod
    def _parse_reply(line: str) -> tuple[float, float, float]:
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"unparseable reply: {line!r}") from exc
        if isinstance(obj, list):
            values = obj
        elif isinstance(obj, dict):
            try:
                values = [obj[k] for k in _CRIT_KEYS]
            except KeyError as exc:
                raise ProtocolError(f"reply missing criterion key: {line!r}") from exc
        else:
            raise ProtocolError(f"reply must be an object or array: {line!r}")
        if len(values) != 3:
            raise ProtocolError(f"reply must carry three probabilities: {line!r}")
        try:
            triple = tuple(float(v) for v in values)
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"non-numeric probability in reply: {line!r}") from exc
        if not all(0.0 <= v <= 1.0 for v in triple):
            raise ProtocolError(f"probability out of range in reply: {line!r}")
        return triple


# ---------------------------------------------------------------------------
# Ranking
# ---------------------------------------------------------------------------


def rank_table(scores: Mapping[str, float], higher_is_better: bool = True) -> dict[str, int]:
    """Dense ranks (1 = best); exact score ties share the better rank."""
    items = sorted(scores.items(), key=lambda kv: (-kv[1] if higher_is_better else kv[1], kv[0]))
    ranks: dict[str, int] = {}
    rank = 0
    prev: float | None = None
    for team, score in items:
        if prev is None or score != prev:
            rank += 1
            prev = score
        ranks[team] = rank
    return ranks


def aggregate_overall(
    rank_a: Mapping[str, int],
    rank_b: Mapping[str, int],
    rank_c: Mapping[str, int],
) -> dict[str, int]:
    """Overall rank by rank sum; the detection-track rank breaks ties.

    Teams with identical (rank sum, detection rank) pairs share a rank.
    """
    teams = set(rank_a)
    if teams != set(rank_b) or teams != set(rank_c):
        raise ValueError("rank tables must cover the same teams")
    key = {t: (rank_a[t] + rank_b[t] + rank_c[t], rank_a[t]) for t in teams}
    order = sorted(teams, key=lambda t: (key[t], t))
    ranks: dict[str, int] = {}
    rank = 0
    prev: tuple[int, int] | None = None
    for team in order:
        if prev is None or key[team] != prev:
            rank += 1
            prev = key[team]
        ranks[team] = rank
    return ranks


def spearman(rank_x: Mapping[str, float], rank_y: Mapping[str, float]) -> float:
    """Spearman correlation of two rank tables over the same teams, using the
    no-ties formula rho = 1 - 6 sum(d^2) / (n (n^2 - 1))."""
    if set(rank_x) != set(rank_y):
        raise ValueError("rank tables must cover the same teams")
    n = len(rank_x)
    if n < 2:
        raise ValueError("need at least two teams")
    d2 = sum((rank_x[t] - rank_y[t]) ** 2 for t in rank_x)
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


@dataclass(frozen=True)
class ScatterPoint:
    team_id: str
    mean: float
    std: float


def robustness_scatter(
    variant_scores: Mapping[str, Mapping[str, float]]
) -> list[ScatterPoint]:
    """Per team, the mean and population standard deviation of its variant
    scores (the coordinates of the robustness scatter plot)."""
    out = []
    for team in sorted(variant_scores):
        values = [v for v in variant_scores[team].values() if v is not None]
        if not values:
            raise EmptyVariants(team)
        mean = sum(values) / len(values)
        var = sum((v - mean) ** 2 for v in values) / len(values)
        out.append(ScatterPoint(team_id=team, mean=mean, std=math.sqrt(var)))
    return out


# ---------------------------------------------------------------------------
# End-to-end evaluation of one submission
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    """Everything the platform publishes about one submission."""

    team_id: str
    clip_count: int
    map_result: MapResult
    brier_result: BrierResult
    variant_map: dict[str, MapResult]
    drs_mean: float | None
    drs_per_criterion: dict[str, float | None]
    causal: CausalAuditResult | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "team_id": self.team_id,
            "clip_count": self.clip_count,
            "map": self.map_result.to_dict(),
            "brier": self.brier_result.to_dict(),
            "variant_map": {s: r.to_dict() for s, r in self.variant_map.items()},
            "drs": {"mean": self.drs_mean, "per_criterion": dict(self.drs_per_criterion)},
            "causal": self.causal.to_dict() if self.causal else None,
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "MetricsReport":
        return MetricsReport(
            team_id=d["team_id"],
            clip_count=int(d["clip_count"]),
            map_result=MapResult.from_dict(d["map"]),
            brier_result=BrierResult.from_dict(d["brier"]),
            variant_map={s: MapResult.from_dict(r) for s, r in d["variant_map"].items()},
            drs_mean=d["drs"]["mean"],
            drs_per_criterion=dict(d["drs"]["per_criterion"]),
            causal=CausalAuditResult.from_dict(d["causal"]) if d.get("causal") else None,
        )


def evaluate_submission(
    sub: Submission,
    fused: Mapping[str, FusedClip],
    records: Sequence[ClipRecord],
    split_defs: Sequence[VariantSplitDef] | None = None,
    causal: CausalAuditResult | None = None,
) -> MetricsReport:
    """Score one submission on every track over the clips in ``records``.

    Explicit ``split_defs`` must all be satisfiable (``EmptySplit`` otherwise);
    the built-in defaults silently drop splits that match no clip, since a
    small pool may simply lack, say, any robotic case.
    """
    clip_ids = sorted(r.clip_id for r in records)
    sub.validate(clip_ids)
    if split_defs is not None:
        splits = build_variant_splits(records, list(split_defs))
    else:
        splits = {}
        for d in default_variant_splits(records):
            members = sorted(r.clip_id for r in records if d.matches(r))
            if members:
                splits[d.split_id] = members

    map_result = map_score(sub, fused, clip_ids)
    brier_result = brier_score(sub, fused, clip_ids)

    variant_map: dict[str, MapResult] = {}
    for split_id in sorted(splits):
        variant_map[split_id] = map_score(sub, fused, splits[split_id])

    split_means = [r.mean for r in variant_map.values() if r.mean is not None]
    drs_mean = domain_robustness_score(split_means) if split_means else None
    drs_per: dict[str, float | None] = {}
    for key in _CRIT_KEYS:
        values = [
            r.per_criterion[key]
            for r in variant_map.values()
            if r.per_criterion[key] is not None
        ]
        drs_per[key] = domain_robustness_score(values) if values else None

    return MetricsReport(
        team_id=sub.team_id,
        clip_count=len(clip_ids),
        map_result=map_result,
        brier_result=brier_result,
        variant_map=variant_map,
        drs_mean=drs_mean,
        drs_per_criterion=drs_per,
        causal=causal,
    )


# ---------------------------------------------------------------------------
# Leaderboard
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LeaderboardRow:
    team_id: str
    overall_rank: int
    rank_detection: int
    rank_calibration: int
    rank_robustness: int
    map_mean: float | None
    brier_mean: float
    drs_mean: float | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "team_id": self.team_id,
            "overall_rank": self.overall_rank,
            "rank_detection": self.rank_detection,
            "rank_calibration": self.rank_calibration,
            "rank_robustness": self.rank_robustness,
            "map_mean": self.map_mean,
            "brier_mean": self.brier_mean,
            "drs_mean": self.drs_mean,
        }


def leaderboard(reports: Sequence[MetricsReport]) -> list[LeaderboardRow]:
    """Rank every team on the three tracks and aggregate to an overall rank."""
    if not reports:
        return []
    by_team = {r.team_id: r for r in reports}
    if len(by_team) != len(reports):
        raise ValueError("duplicate team in reports")
    worst = float("-inf")
    rank_a = rank_table(
        {t: worst if r.map_result.mean is None else r.map_result.mean for t, r in by_team.items()},
        higher_is_better=True,
    )
    rank_b = rank_table(
        {t: r.brier_result.mean for t, r in by_team.items()}, higher_is_better=False
    )
    rank_c = rank_table(
        {t: worst if r.drs_mean is None else r.drs_mean for t, r in by_team.items()},
        higher_is_better=True,
    )
    overall = aggregate_overall(rank_a, rank_b, rank_c)
    rows = [
        LeaderboardRow(
            team_id=t,
            overall_rank=overall[t],
            rank_detection=rank_a[t],
            rank_calibration=rank_b[t],
            rank_robustness=rank_c[t],
            map_mean=by_team[t].map_result.mean,
            brier_mean=by_team[t].brier_result.mean,
            drs_mean=by_team[t].drs_mean,
        )
        for t in by_team
    ]
    rows.sort(key=lambda r: (r.overall_rank, r.team_id))
    return rows


def write_leaderboard_csv(rows: Sequence[LeaderboardRow], path: str | Path) -> None:
    """Delimited leaderboard with scores on the published percent scale."""
    header = (
        "overall_rank,team_id,rank_detection,rank_calibration,rank_robustness,"
        "map_mean_pct,brier_mean,drs_mean_pct"
    )
    lines = [header]
    for r in rows:
        map_pct = "" if r.map_mean is None else f"{round_half_up(100 * r.map_mean, 2):.2f}"
        drs_pct = "" if r.drs_mean is None else f"{round_half_up(100 * r.drs_mean, 2):.2f}"
        lines.append(
            f"{r.overall_rank},{r.team_id},{r.rank_detection},{r.rank_calibration},"
            f"{r.rank_robustness},{map_pct},{round_half_up(r.brier_mean, 4):.4f},{drs_pct}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_leaderboard_json(rows: Sequence[LeaderboardRow], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps([r.to_dict() for r in rows], indent=2, sort_keys=False) + "\n",
        encoding="utf-8",
    )

"""Event-sourced campaign engine.

Every change to platform state is an event appended to a per-entity,
gap-free sequence; current state is a pure fold over the log, so replaying
the log (or a snapshot plus the tail) reproduces the live state exactly.
Side effects never run inline: commands queue typed effects, and
``run_due_effects`` executes whatever is due with capped exponential-backoff
retries. Adapters receive a stable idempotency key per effect, which keeps
observable side effects exactly-once across retries and crash recovery.

Commands validate against current state, then append one or more events.
Derived events (a concordant screening chain, an exam grade, a clip reaching
full coverage) are chained at command time and land in the log themselves;
replay is therefore a dumb fold that never re-derives anything.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Protocol, Sequence

from . import scheduling, videoflow
from .annotators import FunnelReport, funnel_report
from .config import PlatformConfig
from .domain import (
    Annotator,
    AnnotatorEvent,
    Assessment,
    PreAnnotation,
    QualifiedClip,
    VideoCase,
    VideoEvent,
    VideoState,
    decode_event,
    encode_event,
)
from .fusion import ClipRecord, FusedClip, fuse_assessments, make_clip_record
from .scheduling import Assignment, AssignmentBatch, CoverageState
from .util import isoformat_utc, parse_utc, utc_now


class UnknownEntity(Exception):
    pass


class DuplicateEntity(Exception):
    pass


class SequenceGap(Exception):
    """An event arrived with a sequence number that does not extend the
    entity's log by exactly one."""


class CorruptSnapshot(Exception):
    pass


ENTITY_VIDEO = "video"
ENTITY_ANNOTATOR = "annotator"
ENTITY_CAMPAIGN = "campaign"
CAMPAIGN_ID = "main"


@dataclass(frozen=True)
class StoredEvent:
    entity_kind: str
    entity_id: str
    seq: int
    occurred_at: str
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "entity_kind": self.entity_kind,
            "entity_id": self.entity_id,
            "seq": self.seq,
            "occurred_at": self.occurred_at,
            "payload": self.payload,
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "StoredEvent":
        return StoredEvent(
            entity_kind=d["entity_kind"],
            entity_id=d["entity_id"],
            seq=int(d["seq"]),
            occurred_at=d["occurred_at"],
            payload=dict(d["payload"]),
        )


# ---------------------------------------------------------------------------
# Effects
# ---------------------------------------------------------------------------


class EffectKind(str, Enum):
    REMINDER = "REMINDER"
    TICK_DUE = "TICK_DUE"
    NOTIFY_ORGANIZER = "NOTIFY_ORGANIZER"
    FUSE_CLIP = "FUSE_CLIP"


class EffectStatus(str, Enum):
    PENDING = "PENDING"
    DONE = "DONE"
    FAILED = "FAILED"


@dataclass
class Effect:
    effect_id: str
    kind: EffectKind
    payload: dict[str, Any]
    due_at: datetime
    attempts: int = 0
    status: EffectStatus = EffectStatus.PENDING
    last_error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "effect_id": self.effect_id,
            "kind": self.kind.value,
            "payload": self.payload,
            "due_at": isoformat_utc(self.due_at),
            "attempts": self.attempts,
            "status": self.status.value,
            "last_error": self.last_error,
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "Effect":
        return Effect(
            effect_id=d["effect_id"],
            kind=EffectKind(d["kind"]),
            payload=dict(d["payload"]),
            due_at=parse_utc(d["due_at"]),
            attempts=int(d.get("attempts", 0)),
            status=EffectStatus(d.get("status", EffectStatus.PENDING.value)),
            last_error=d.get("last_error"),
        )


class NotificationPort(Protocol):
    """Outbound messages. ``idempotency_key`` is stable per logical send, so
    an adapter that records keys delivers exactly once across retries."""

    def send(self, idempotency_key: str, target: str, message: str) -> None: ...


class MemoryNotifier:
    """In-memory adapter used in tests and by default: records every unique
    delivery and silently swallows retried duplicates."""

    def __init__(self) -> None:
        self.sent: list[tuple[str, str, str]] = []
        self._keys: set[str] = set()

    def send(self, idempotency_key: str, target: str, message: str) -> None:
        if idempotency_key in self._keys:
            return
        self._keys.add(idempotency_key)
        self.sent.append((idempotency_key, target, message))


class JsonlNotifier:
    """Appends one JSON line per unique delivery to a file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._keys: set[str] = set()
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._keys.add(json.loads(line)["idempotency_key"])

    def send(self, idempotency_key: str, target: str, message: str) -> None:
        if idempotency_key in self._keys:
            return
        self._keys.add(idempotency_key)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(
                json.dumps(
                    {
                        "idempotency_key": idempotency_key,
                        "target": target,
                        "message": message,
                    },
                    sort_keys=False,
                )
                + "\n"
            )


# ---------------------------------------------------------------------------
# Platform state and the pure fold
# ---------------------------------------------------------------------------


@dataclass
class PlatformState:
    videos: dict[str, VideoCase] = field(default_factory=dict)
    annotators: dict[str, Annotator] = field(default_factory=dict)
    clips: dict[str, QualifiedClip] = field(default_factory=dict)
    coverage: CoverageState = field(default_factory=CoverageState)
    assessments: dict[str, dict[str, Assessment]] = field(default_factory=dict)
    fused: dict[str, FusedClip] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "videos": {k: self.videos[k].to_dict() for k in sorted(self.videos)},
            "annotators": {k: self.annotators[k].to_dict() for k in sorted(self.annotators)},
            "clips": {k: self.clips[k].to_dict() for k in sorted(self.clips)},
            "coverage": self.coverage.to_dict(),
            "assessments": {
                cid: {a: self.assessments[cid][a].to_dict() for a in sorted(self.assessments[cid])}
                for cid in sorted(self.assessments)
            },
            "fused": {k: self.fused[k].to_dict() for k in sorted(self.fused)},
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "PlatformState":
        state = PlatformState()
        state.videos = {k: VideoCase.from_dict(v) for k, v in d.get("videos", {}).items()}
        state.annotators = {
            k: Annotator.from_dict(v) for k, v in d.get("annotators", {}).items()
        }
        state.clips = {k: QualifiedClip.from_dict(v) for k, v in d.get("clips", {}).items()}
        state.coverage = CoverageState.from_dict(d.get("coverage", {}))
        state.assessments = {
            cid: {a: Assessment.from_dict(v) for a, v in m.items()}
            for cid, m in d.get("assessments", {}).items()
        }
        state.fused = {k: FusedClip.from_dict(v) for k, v in d.get("fused", {}).items()}
        return state


def apply_event(state: PlatformState, event: StoredEvent, config: PlatformConfig) -> None:
    """Fold one stored event into the state. Pure with respect to the log:
    no effect queueing, no derived events, no clock access."""
    payload = event.payload
    kind = payload["kind"]

    if event.entity_kind == ENTITY_VIDEO:
        if kind == "CASE_RECEIVED":
            case = VideoCase.from_dict(payload["case"])
            if case.case_id in state.videos:
                raise DuplicateEntity(case.case_id)
            state.videos[case.case_id] = case
            return
        case = state.videos.get(event.entity_id)
        if case is None:
            raise UnknownEntity(event.entity_id)
        from .domain import video_transition

        state.videos[event.entity_id] = video_transition(case, decode_event(payload))
        return

    if event.entity_kind == ENTITY_ANNOTATOR:
        if kind == "ANNOTATOR_REGISTERED":
            annotator = Annotator.from_dict(payload["annotator"])
            if annotator.annotator_id in state.annotators:
                raise DuplicateEntity(annotator.annotator_id)
            state.annotators[annotator.annotator_id] = annotator
            return
        annotator = state.annotators.get(event.entity_id)
        if annotator is None:
            raise UnknownEntity(event.entity_id)
        from .domain import annotator_transition

        state.annotators[event.entity_id] = annotator_transition(
            annotator, decode_event(payload)
        )
        return

    if event.entity_kind != ENTITY_CAMPAIGN:
        raise UnknownEntity(f"unknown entity kind {event.entity_kind!r}")

    if kind == "CLIP_REGISTERED":
        clip = QualifiedClip.from_dict(payload["clip"])
        if clip.clip_id in state.clips:
            raise DuplicateEntity(clip.clip_id)
        state.clips[clip.clip_id] = clip
        state.coverage.register_clip(clip.clip_id)
        return

    if kind == "TICK_RUN":
        for raw in payload["assignments"]:
            assignment = Assignment.from_dict(raw)
            cc = state.coverage.clips.get(assignment.clip_id)
            if cc is None:
                raise UnknownEntity(assignment.clip_id)
            cc.outstanding[assignment.annotator_id] = assignment
            state.coverage.burned.add((assignment.annotator_id, assignment.clip_id))
        state.coverage.next_tick_id = int(payload["tick_id"]) + 1
        return

    if kind == "ASSIGNMENTS_REVOKED":
        for raw in payload["assignments"]:
            assignment = Assignment.from_dict(raw)
            cc = state.coverage.clips.get(assignment.clip_id)
            if cc is None:
                raise UnknownEntity(assignment.clip_id)
            cc.outstanding.pop(assignment.annotator_id, None)
        return

    if kind == "ASSESSMENT_ACCEPTED":
        assessment = Assessment.from_dict(payload["assessment"])
        scheduling.accept_assessment(
            state.coverage, assessment, config.required_coverage
        )
        state.assessments.setdefault(assessment.clip_id, {})[
            assessment.annotator_id
        ] = assessment
        worker = state.annotators.get(assessment.annotator_id)
        if worker is not None:
            state.annotators[assessment.annotator_id] = replace(
                worker, completed_count=worker.completed_count + 1
            )
        return

    if kind == "CLIP_FUSED":
        fused = FusedClip.from_dict(payload["fused"])
        state.fused[fused.clip_id] = fused
        return

    raise UnknownEntity(f"unknown campaign event kind {kind!r}")


def replay(
    events: Iterable[StoredEvent],
    config: PlatformConfig | None = None,
    state: PlatformState | None = None,
    seqs: dict[tuple[str, str], int] | None = None,
) -> tuple[PlatformState, dict[tuple[str, str], int]]:
    """Fold a log into a fresh (or provided) state, enforcing per-entity
    gap-free sequences. Returns the state and the last-seen sequence map."""
    config = config or PlatformConfig()
    state = state if state is not None else PlatformState()
    seqs = dict(seqs) if seqs else {}
    for event in events:
        key = (event.entity_kind, event.entity_id)
        expected = seqs.get(key, 0) + 1
        if event.seq != expected:
            raise SequenceGap(
                f"{event.entity_kind}/{event.entity_id}: got seq {event.seq}, expected {expected}"
            )
        apply_event(state, event, config)
        seqs[key] = event.seq
    return state, seqs


# ---------------------------------------------------------------------------
# The engine
# ---------------------------------------------------------------------------


class Orchestrator:
    """Commands in, events appended, effects queued; see module docstring."""

    def __init__(
        self,
        config: PlatformConfig | None = None,
        notifier: NotificationPort | None = None,
        clock: Callable[[], datetime] = utc_now,
        store_dir: str | Path | None = None,
    ):
        self.config = config or PlatformConfig()
        self.notifier = notifier if notifier is not None else MemoryNotifier()
        self.clock = clock
        self.store_dir = Path(store_dir) if store_dir else (
            Path(self.config.store_dir) if self.config.store_dir else None
        )
        if self.store_dir:
            self.store_dir.mkdir(parents=True, exist_ok=True)
        self.state = PlatformState()
        self.log: list[StoredEvent] = []
        self.effects: list[Effect] = []
        self.errors: list[dict[str, Any]] = []
        self._seqs: dict[tuple[str, str], int] = {}
        self._next_effect = 1
        self._dedupe: dict[str, dict[str, Any]] = {}

    # -- persistence paths --------------------------------------------------

    @property
    def _events_path(self) -> Path | None:
        return self.store_dir / "events.jsonl" if self.store_dir else None

    @property
    def _errors_path(self) -> Path | None:
        return self.store_dir / "errors.jsonl" if self.store_dir else None

    @property
    def _snapshot_path(self) -> Path | None:
        return self.store_dir / "snapshot.json" if self.store_dir else None

    # -- event append -------------------------------------------------------

    def _append(self, entity_kind: str, entity_id: str, payload: dict[str, Any]) -> StoredEvent:
        key = (entity_kind, entity_id)
        event = StoredEvent(
            entity_kind=entity_kind,
            entity_id=entity_id,
            seq=self._seqs.get(key, 0) + 1,
            occurred_at=isoformat_utc(self.clock()),
            payload=payload,
        )
        try:
            apply_event(self.state, event, self.config)
        except Exception as exc:
            self._log_error(entity_kind, entity_id, payload, exc)
            raise
        self._seqs[key] = event.seq
        self.log.append(event)
        if self._events_path:
            with open(self._events_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event.to_dict(), sort_keys=False) + "\n")
        return event

    def _log_error(
        self, entity_kind: str, entity_id: str, payload: Mapping[str, Any], exc: Exception
    ) -> None:
        entry = {
            "at": isoformat_utc(self.clock()),
            "entity_kind": entity_kind,
            "entity_id": entity_id,
            "event_kind": payload.get("kind"),
            "error": f"{type(exc).__name__}: {exc}",
        }
        self.errors.append(entry)
        if self._errors_path:
            with open(self._errors_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=False) + "\n")

    def _video_event(self, case_id: str, event: VideoEvent) -> StoredEvent:
        return self._append(ENTITY_VIDEO, case_id, encode_event(event))

    def _annotator_event(self, annotator_id: str, event: AnnotatorEvent) -> StoredEvent:
        return self._append(ENTITY_ANNOTATOR, annotator_id, encode_event(event))

    # -- video commands -----------------------------------------------------

    def intake_case(self, case: VideoCase) -> None:
        self._append(ENTITY_VIDEO, case.case_id, {"kind": "CASE_RECEIVED", "case": case.to_dict()})

    def start_screening(self, case_id: str) -> None:
        from .domain import ScreeningStarted

        self._video_event(case_id, ScreeningStarted())

    def submit_screening_verdict(self, case_id: str, verdict: PreAnnotation) -> None:
        """Append one screening verdict; closes the chain when the last two
        verdicts agree, moving the case on to its post-screening state."""
        from .domain import ConcordanceReached, PreAnnotationSubmitted

        case = self.state.videos.get(case_id)
        if case is None:
            raise UnknownEntity(case_id)
        chain = videoflow.AdjudicationChain(case_id=case_id, entries=case.preannotation_chain)
        chain = videoflow.submit_preannotation(chain, verdict)  # raises on misuse
        self._video_event(case_id, PreAnnotationSubmitted(entry=verdict))
        if chain.status is videoflow.ChainStatus.CONCORDANT:
            self._video_event(case_id, ConcordanceReached(metadata=chain.final_metadata))

    def complete_blur(self, case_id: str) -> None:
        from .domain import BlurCompleted

        self._video_event(case_id, BlurCompleted())

    def extract_clip(self, case_id: str) -> QualifiedClip:
        from .domain import ClipExtracted

        case = self.state.videos.get(case_id)
        if case is None:
            raise UnknownEntity(case_id)
        clip = videoflow.extract_clip(case)
        self._video_event(case_id, ClipExtracted(clip=clip))
        self._append(
            ENTITY_CAMPAIGN, CAMPAIGN_ID, {"kind": "CLIP_REGISTERED", "clip": clip.to_dict()}
        )
        return clip

    # -- annotator commands ---------------------------------------------------

    def register_annotator(self, annotator: Annotator) -> None:
        self._append(
            ENTITY_ANNOTATOR,
            annotator.annotator_id,
            {"kind": "ANNOTATOR_REGISTERED", "annotator": annotator.to_dict()},
        )

    def annotator_event(self, annotator_id: str, event: AnnotatorEvent) -> Annotator:
        from .domain import ExamGraded, ExamSubmitted

        self._annotator_event(annotator_id, event)
        if isinstance(event, ExamSubmitted):
            self._annotator_event(annotator_id, ExamGraded())
        return self.state.annotators[annotator_id]

    # -- scheduling commands --------------------------------------------------

    def active_annotator_ids(self) -> list[str]:
        from .domain import AnnotatorState

        return sorted(
            a_id
            for a_id, a in self.state.annotators.items()
            if a.state is AnnotatorState.ACTIVE
        )

    def run_tick(self, now: datetime | None = None, seed: int | None = None) -> AssignmentBatch:
        """Revoke stale assignments of dropped annotators, issue this tick's
        batch, start annotation on first-touched videos, and queue reminder
        effects for anything overdue."""
        from .domain import AnnotatorState, AnnotationStarted

        now = now or self.clock()
        tick_id = self.state.coverage.next_tick_id
        if seed is None:
            seed = self.config.tick_seed_base + tick_id

        dropped = {
            a_id
            for a_id, a in self.state.annotators.items()
            if a.state is AnnotatorState.DROPPED
        }
        if dropped:
            probe = copy.deepcopy(self.state.coverage)
            revoked = scheduling.revoke_stale_assignments(probe, dropped, tick_id)
            if revoked:
                self._append(
                    ENTITY_CAMPAIGN,
                    CAMPAIGN_ID,
                    {
                        "kind": "ASSIGNMENTS_REVOKED",
                        "assignments": [a.to_dict() for a in revoked],
                    },
                )

        probe = copy.deepcopy(self.state.coverage)
        batch = scheduling.run_tick(
            probe,
            self.active_annotator_ids(),
            now,
            seed,
            bucket_size=self.config.bucket_size,
            required_coverage=self.config.required_coverage,
            cadence=timedelta(days=self.config.cadence_days),
        )
        self._append(
            ENTITY_CAMPAIGN,
            CAMPAIGN_ID,
            {
                "kind": "TICK_RUN",
                "tick_id": tick_id,
                "seed": seed,
                "now": isoformat_utc(now),
                "assignments": [a.to_dict() for a in batch.assignments],
            },
        )

        started: set[str] = set()
        for assignment in batch.assignments:
            clip = self.state.clips[assignment.clip_id]
            case = self.state.videos.get(clip.case_id)
            if case is not None and case.state is VideoState.CLIPPED and case.case_id not in started:
                self._video_event(case.case_id, AnnotationStarted())
                started.add(case.case_id)

        overdue = scheduling.list_overdue(self.state.coverage, now)
        by_annotator: dict[str, list[Assignment]] = {}
        for assignment in overdue:
            by_annotator.setdefault(assignment.annotator_id, []).append(assignment)
        for annotator_id in sorted(by_annotator):
            stale = by_annotator[annotator_id]
            self.queue_effect(
                EffectKind.REMINDER,
                {
                    "annotator_id": annotator_id,
                    "clip_ids": sorted(a.clip_id for a in stale),
                    "tick_id": tick_id,
                },
                due_at=now,
            )

        self.queue_effect(
            EffectKind.TICK_DUE,
            {"seed": self.config.tick_seed_base + tick_id + 1},
            due_at=now + timedelta(days=self.config.cadence_days),
        )
        return batch

    def blind_payload(self, annotator_id: str, clip_id: str) -> scheduling.AnnotatorView:
        """The rater-facing view of an assigned clip; provenance never leaves
        the platform."""
        cc = self.state.coverage.clips.get(clip_id)
        if cc is None or annotator_id not in cc.outstanding:
            raise scheduling.UnknownAssignment(f"{annotator_id}/{clip_id}")
        return scheduling.blind_payload(self.state.clips[clip_id])

    def accept_assessment(
        self, assessment: Assessment, idempotency_key: str | None = None
    ) -> dict[str, Any]:
        """Record one completed assessment. With an idempotency key, a retry
        of the same submission returns the first result and appends nothing."""
        from .domain import AllAssessmentsIn

        if idempotency_key is not None and idempotency_key in self._dedupe:
            return self._dedupe[idempotency_key]

        cc = self.state.coverage.clips.get(assessment.clip_id)
        if cc is None:
            raise scheduling.UnknownAssignment(
                f"{assessment.annotator_id}/{assessment.clip_id}"
            )
        if assessment.annotator_id in cc.completed:
            raise scheduling.DuplicateAssessment(
                f"{assessment.annotator_id}/{assessment.clip_id}"
            )
        if assessment.annotator_id not in cc.outstanding:
            raise scheduling.UnknownAssignment(
                f"{assessment.annotator_id}/{assessment.clip_id}"
            )

        completes = len(cc.completed) + 1 == self.config.required_coverage
        self._append(
            ENTITY_CAMPAIGN,
            CAMPAIGN_ID,
            {"kind": "ASSESSMENT_ACCEPTED", "assessment": assessment.to_dict()},
        )
        if completes:
            clip = self.state.clips[assessment.clip_id]
            case = self.state.videos.get(clip.case_id)
            if case is not None and case.state is VideoState.IN_ANNOTATION:
                self._video_event(case.case_id, AllAssessmentsIn())
            self.queue_effect(
                EffectKind.FUSE_CLIP, {"clip_id": assessment.clip_id}, due_at=self.clock()
            )
        result = {
            "clip_id": assessment.clip_id,
            "annotator_id": assessment.annotator_id,
            "clip_completed": completes,
        }
        if idempotency_key is not None:
            self._dedupe[idempotency_key] = result
        return result

    def fuse_clip(self, clip_id: str) -> FusedClip:
        """Fuse a fully-covered clip; already-fused clips return the stored
        result, which makes the fusion effect safely retryable."""
        from .domain import FusionCompleted

        if clip_id in self.state.fused:
            return self.state.fused[clip_id]
        ratings = self.state.assessments.get(clip_id, {})
        fused = fuse_assessments(sorted(ratings.values(), key=lambda a: a.annotator_id))
        self._append(
            ENTITY_CAMPAIGN, CAMPAIGN_ID, {"kind": "CLIP_FUSED", "fused": fused.to_dict()}
        )
        clip = self.state.clips.get(clip_id)
        if clip is not None:
            case = self.state.videos.get(clip.case_id)
            if case is not None and case.state is VideoState.FULLY_ANNOTATED:
                self._video_event(case.case_id, FusionCompleted())
        return fused

    # -- effects --------------------------------------------------------------

    def queue_effect(
        self, kind: EffectKind, payload: dict[str, Any], due_at: datetime | None = None
    ) -> Effect:
        effect = Effect(
            effect_id=f"ef-{self._next_effect:06d}",
            kind=kind,
            payload=payload,
            due_at=due_at or self.clock(),
        )
        self._next_effect += 1
        self.effects.append(effect)
        return effect

    def run_due_effects(self, now: datetime | None = None) -> list[Effect]:
        """Execute every pending effect whose due time has passed. Failures
        back off exponentially (base*factor^(attempts-1)) and an effect that
        has used all its attempts is marked FAILED."""
        now = now or self.clock()
        executed: list[Effect] = []
        for effect in list(self.effects):
            if effect.status is not EffectStatus.PENDING or effect.due_at > now:
                continue
            effect.attempts += 1
            try:
                self._execute_effect(effect, now)
            except Exception as exc:
                effect.last_error = f"{type(exc).__name__}: {exc}"
                self._log_error("effect", effect.effect_id, {"kind": effect.kind.value}, exc)
                if effect.attempts >= self.config.max_attempts:
                    effect.status = EffectStatus.FAILED
                else:
                    delay = self.config.backoff_base_s * (
                        self.config.backoff_factor ** (effect.attempts - 1)
                    )
                    effect.due_at = now + timedelta(seconds=delay)
            else:
                effect.status = EffectStatus.DONE
            executed.append(effect)
        return executed

    def _execute_effect(self, effect: Effect, now: datetime) -> None:
        if effect.kind is EffectKind.REMINDER:
            clip_ids = ", ".join(effect.payload["clip_ids"])
            self.notifier.send(
                idempotency_key=effect.effect_id,
                target=effect.payload["annotator_id"],
                message=f"assignments overdue: {clip_ids}",
            )
        elif effect.kind is EffectKind.NOTIFY_ORGANIZER:
            self.notifier.send(
                idempotency_key=effect.effect_id,
                target="organizer",
                message=effect.payload.get("message", ""),
            )
        elif effect.kind is EffectKind.FUSE_CLIP:
            self.fuse_clip(effect.payload["clip_id"])
        elif effect.kind is EffectKind.TICK_DUE:
            self.run_tick(now=now, seed=effect.payload.get("seed"))
        else:  # pragma: no cover
            raise ValueError(f"unknown effect kind {effect.kind}")

    # -- queries ----------------------------------------------------------------

    def funnel(self) -> FunnelReport:
        return funnel_report(self.state.annotators.values())

    def clip_records(self) -> list[ClipRecord]:
        """Evaluation-facing metadata for every fused clip."""
        records = []
        for clip_id in sorted(self.state.fused):
            clip = self.state.clips[clip_id]
            case = self.state.videos[clip.case_id]
            records.append(
                make_clip_record(
                    self.state.fused[clip_id],
                    case_id=clip.case_id,
                    split=case.split,
                    provenance=case.provenance,
                    assessments=list(self.state.assessments[clip_id].values()),
                )
            )
        return records

    # -- snapshots and recovery --------------------------------------------------

    def snapshot(self) -> dict[str, Any]:
        return {
            "version": 1,
            "seqs": {f"{k}/{i}": v for (k, i), v in sorted(self._seqs.items())},
            "state": self.state.to_dict(),
            "effects": [e.to_dict() for e in self.effects],
            "next_effect": self._next_effect,
            "dedupe": self._dedupe,
        }

    def write_snapshot(self) -> Path:
        if not self._snapshot_path:
            raise ValueError("no store directory configured")
        self._snapshot_path.write_text(
            json.dumps(self.snapshot(), sort_keys=False), encoding="utf-8"
        )
        return self._snapshot_path

    def _restore_snapshot(self, raw: str) -> None:
        try:
            snap = json.loads(raw)
            if snap.get("version") != 1:
                raise ValueError(f"unsupported snapshot version {snap.get('version')}")
            state = PlatformState.from_dict(snap["state"])
            seqs: dict[tuple[str, str], int] = {}
            for key, value in snap["seqs"].items():
                entity_kind, entity_id = key.split("/", 1)
                seqs[(entity_kind, entity_id)] = int(value)
            effects = [Effect.from_dict(e) for e in snap.get("effects", ())]
            next_effect = int(snap.get("next_effect", 1))
            dedupe = dict(snap.get("dedupe", {}))
        except Exception as exc:
            raise CorruptSnapshot(str(exc)) from exc
        self.state = state
        self._seqs = seqs
        self.effects = effects
        self._next_effect = next_effect
        self._dedupe = dedupe

    @classmethod
    def from_log(
        cls,
        events: Sequence[StoredEvent],
        config: PlatformConfig | None = None,
        notifier: NotificationPort | None = None,
        clock: Callable[[], datetime] = utc_now,
    ) -> "Orchestrator":
        orch = cls(config=config, notifier=notifier, clock=clock)
        state, seqs = replay(events, orch.config)
        orch.state = state
        orch._seqs = seqs
        orch.log = list(events)
        return orch

    @classmethod
    def load(
        cls,
        store_dir: str | Path,
        config: PlatformConfig | None = None,
        notifier: NotificationPort | None = None,
        clock: Callable[[], datetime] = utc_now,
    ) -> "Orchestrator":
        """Recover from disk: snapshot plus the event tail when the snapshot
        is healthy, a full replay of the log otherwise."""
        store_dir = Path(store_dir)
        orch = cls(config=config, notifier=notifier, clock=clock, store_dir=store_dir)
        events: list[StoredEvent] = []
        if orch._events_path and orch._events_path.exists():
            with open(orch._events_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        events.append(StoredEvent.from_dict(json.loads(line)))
        orch.log = events

        restored = False
        if orch._snapshot_path and orch._snapshot_path.exists():
            try:
                orch._restore_snapshot(orch._snapshot_path.read_text(encoding="utf-8"))
                restored = True
            except CorruptSnapshot:
                orch.state = PlatformState()
                orch._seqs = {}

        if restored:
            tail = [
                e
                for e in events
                if e.seq > orch._seqs.get((e.entity_kind, e.entity_id), 0)
            ]
            state, seqs = replay(tail, orch.config, state=orch.state, seqs=orch._seqs)
            orch.state = state
            orch._seqs = seqs
        else:
            state, seqs = replay(events, orch.config)
            orch.state = state
            orch._seqs = seqs
        return orch

"""Core domain model: value types, the two lifecycle state machines, and a
stable JSON codec.

Everything downstream (screening, scheduling, fusion, scoring, the event log)
builds on the types in this module. Values are frozen dataclasses; lifecycle
progress happens through explicit event objects fed to ``video_transition`` /
``annotator_transition``, which return updated copies and raise
``IllegalTransition`` for anything not in the transition tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, ClassVar, Mapping

# Clip geometry: a qualified clip is the 90 seconds leading up to the clipping
# event, sampled at 1 frame per second, with every fifth frame annotated.
CLIP_DURATION_S = 90.0
FRAME_RATE_HZ = 1.0
FRAME_COUNT = 90
ANNOTATED_FRAME_STEP = 5
ANNOTATED_FRAME_INDICES: tuple[int, ...] = tuple(range(0, FRAME_COUNT, ANNOTATED_FRAME_STEP))

RATERS_PER_CLIP = 3
EXAM_PASS_THRESHOLD = 0.75
TIMESTAMP_TOLERANCE_S = 2.0


class CvsCriterion(str, Enum):
    """The three binary criteria assessed on every annotated frame."""

    TWO_STRUCTURES = "C1"
    CYSTIC_PLATE = "C2"
    HEPATOCYSTIC_TRIANGLE = "C3"


CRITERIA: tuple[CvsCriterion, ...] = (
    CvsCriterion.TWO_STRUCTURES,
    CvsCriterion.CYSTIC_PLATE,
    CvsCriterion.HEPATOCYSTIC_TRIANGLE,
)


class SurgicalApproach(str, Enum):
    LAPAROSCOPIC = "LAPAROSCOPIC"
    ROBOTIC = "ROBOTIC"


class ExclusionReason(str, Enum):
    NOT_CHOLECYSTECTOMY = "NOT_CHOLECYSTECTOMY"
    NO_CONTINUOUS_90S = "NO_CONTINUOUS_90S"
    BAILOUT = "BAILOUT"
    INCOMPLETE_NO_CLIPPING = "INCOMPLETE_NO_CLIPPING"


class AgreementLevel(str, Enum):
    FULL = "FULL"
    PARTIAL = "PARTIAL"


class VideoState(str, Enum):
    RECEIVED = "RECEIVED"
    SCREENING = "SCREENING"
    EXCLUDED = "EXCLUDED"
    REPROCESSING = "REPROCESSING"
    QUALIFIED = "QUALIFIED"
    CLIPPED = "CLIPPED"
    IN_ANNOTATION = "IN_ANNOTATION"
    FULLY_ANNOTATED = "FULLY_ANNOTATED"
    FUSED = "FUSED"


class AnnotatorState(str, Enum):
    CONTACTED = "CONTACTED"
    INELIGIBLE = "INELIGIBLE"
    ELIGIBLE = "ELIGIBLE"
    TRAINING = "TRAINING"
    EXAM_TAKEN = "EXAM_TAKEN"
    QUALIFIED = "QUALIFIED"
    FAILED = "FAILED"
    ACTIVE = "ACTIVE"
    PAUSED = "PAUSED"
    DROPPED = "DROPPED"


TERMINAL_ANNOTATOR_STATES = frozenset(
    {AnnotatorState.INELIGIBLE, AnnotatorState.FAILED, AnnotatorState.DROPPED}
)


class IllegalTransition(Exception):
    """Raised when an event is not legal in the entity's current state."""

    def __init__(self, state: Enum, event_kind: str):
        super().__init__(f"event {event_kind} is not legal in state {state.value}")
        self.state = state
        self.event_kind = event_kind


class ValidationError(ValueError):
    """Raised when a value type is constructed with inconsistent fields."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValidationError(message)


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CaseProvenance:
    """Where a case came from. ``None`` means unknown and is never conflated
    with a real country or vendor."""

    country: str | None
    device_vendor: str | None
    approach: SurgicalApproach
    used_ioc: bool
    used_icg: bool
    source_institution: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "country": self.country,
            "device_vendor": self.device_vendor,
            "approach": self.approach.value,
            "used_ioc": self.used_ioc,
            "used_icg": self.used_icg,
            "source_institution": self.source_institution,
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "CaseProvenance":
        return CaseProvenance(
            country=d["country"],
            device_vendor=d["device_vendor"],
            approach=SurgicalApproach(d["approach"]),
            used_ioc=bool(d["used_ioc"]),
            used_icg=bool(d["used_icg"]),
            source_institution=d.get("source_institution"),
        )


@dataclass(frozen=True)
class PreAnnotation:
    """One rater's screening verdict for a case.

    The first block of fields is the verdict contract (what two raters must
    agree on); the second block records the raw observations the verdict was
    derived from, kept for audit and for re-running the eligibility rules.
    """

    rater_id: str
    eligible: bool
    exclusion_reason: ExclusionReason | None
    clipping_timestamp: float | None
    used_ioc: bool
    used_icg: bool
    approach: SurgicalApproach
    # raw observations
    is_cholecystectomy: bool = True
    bailout: bool = False
    window_obscured: bool = False
    needs_blur: bool = False

    def __post_init__(self) -> None:
        _require(
            self.eligible == (self.exclusion_reason is None),
            "eligible must hold exactly when exclusion_reason is absent",
        )
        if self.eligible:
            _require(
                self.clipping_timestamp is not None
                and self.clipping_timestamp >= CLIP_DURATION_S,
                "an eligible verdict needs a clipping timestamp at or after "
                f"{CLIP_DURATION_S:.0f} s",
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "rater_id": self.rater_id,
            "eligible": self.eligible,
            "exclusion_reason": self.exclusion_reason.value if self.exclusion_reason else None,
            "clipping_timestamp": self.clipping_timestamp,
            "used_ioc": self.used_ioc,
            "used_icg": self.used_icg,
            "approach": self.approach.value,
            "is_cholecystectomy": self.is_cholecystectomy,
            "bailout": self.bailout,
            "window_obscured": self.window_obscured,
            "needs_blur": self.needs_blur,
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "PreAnnotation":
        reason = d.get("exclusion_reason")
        return PreAnnotation(
            rater_id=d["rater_id"],
            eligible=bool(d["eligible"]),
            exclusion_reason=ExclusionReason(reason) if reason else None,
            clipping_timestamp=d.get("clipping_timestamp"),
            used_ioc=bool(d["used_ioc"]),
            used_icg=bool(d["used_icg"]),
            approach=SurgicalApproach(d["approach"]),
            is_cholecystectomy=bool(d.get("is_cholecystectomy", True)),
            bailout=bool(d.get("bailout", False)),
            window_obscured=bool(d.get("window_obscured", False)),
            needs_blur=bool(d.get("needs_blur", False)),
        )


@dataclass(frozen=True)
class QualifiedClip:
    """The 90 s window ending at the clipping event, ready for blind rating."""

    clip_id: str
    case_id: str
    media_uri: str
    window_start_s: float
    window_end_s: float
    frame_rate_hz: float = FRAME_RATE_HZ
    annotated_frame_indices: tuple[int, ...] = ANNOTATED_FRAME_INDICES

    def __post_init__(self) -> None:
        _require(
            abs((self.window_end_s - self.window_start_s) - CLIP_DURATION_S) < 1e-9,
            f"clip window must span exactly {CLIP_DURATION_S:.0f} s",
        )
        _require(self.window_start_s >= 0.0, "clip window must start within the video")
        _require(
            tuple(self.annotated_frame_indices) == ANNOTATED_FRAME_INDICES,
            "annotated frame indices must be every fifth frame of the 90 s window",
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "clip_id": self.clip_id,
            "case_id": self.case_id,
            "media_uri": self.media_uri,
            "window_start_s": self.window_start_s,
            "window_end_s": self.window_end_s,
            "frame_rate_hz": self.frame_rate_hz,
            "annotated_frame_indices": list(self.annotated_frame_indices),
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "QualifiedClip":
        return QualifiedClip(
            clip_id=d["clip_id"],
            case_id=d["case_id"],
            media_uri=d["media_uri"],
            window_start_s=float(d["window_start_s"]),
            window_end_s=float(d["window_end_s"]),
            frame_rate_hz=float(d.get("frame_rate_hz", FRAME_RATE_HZ)),
            annotated_frame_indices=tuple(d.get("annotated_frame_indices", ANNOTATED_FRAME_INDICES)),
        )


@dataclass(frozen=True)
class VideoCase:
    """A submitted video and everything the platform knows about it."""

    case_id: str
    media_uri: str
    duration_s: float
    provenance: CaseProvenance
    state: VideoState = VideoState.RECEIVED
    split: str | None = None
    preannotation_chain: tuple[PreAnnotation, ...] = ()
    final_metadata: PreAnnotation | None = None
    exclusion_reason: ExclusionReason | None = None
    clip: QualifiedClip | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "case_id": self.case_id,
            "media_uri": self.media_uri,
            "duration_s": self.duration_s,
            "provenance": self.provenance.to_dict(),
            "state": self.state.value,
            "split": self.split,
            "preannotation_chain": [p.to_dict() for p in self.preannotation_chain],
            "final_metadata": self.final_metadata.to_dict() if self.final_metadata else None,
            "exclusion_reason": self.exclusion_reason.value if self.exclusion_reason else None,
            "clip": self.clip.to_dict() if self.clip else None,
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "VideoCase":
        return VideoCase(
            case_id=d["case_id"],
            media_uri=d["media_uri"],
            duration_s=float(d["duration_s"]),
            provenance=CaseProvenance.from_dict(d["provenance"]),
            state=VideoState(d.get("state", VideoState.RECEIVED.value)),
            split=d.get("split"),
            preannotation_chain=tuple(
                PreAnnotation.from_dict(p) for p in d.get("preannotation_chain", ())
            ),
            final_metadata=(
                PreAnnotation.from_dict(d["final_metadata"]) if d.get("final_metadata") else None
            ),
            exclusion_reason=(
                ExclusionReason(d["exclusion_reason"]) if d.get("exclusion_reason") else None
            ),
            clip=QualifiedClip.from_dict(d["clip"]) if d.get("clip") else None,
        )


@dataclass(frozen=True)
class Annotator:
    """A member of the rating workforce, from first contact onwards.

    ``visited`` records every state the annotator has ever been in, in order;
    the recruitment funnel is computed from it.
    """

    annotator_id: str
    contact: str = ""
    clinical_background: bool = True
    state: AnnotatorState = AnnotatorState.CONTACTED
    exam_score: float | None = None
    completed_count: int = 0
    visited: tuple[AnnotatorState, ...] = (AnnotatorState.CONTACTED,)

    def __post_init__(self) -> None:
        if self.state is AnnotatorState.QUALIFIED or (
            AnnotatorState.QUALIFIED in self.visited
        ):
            _require(
                self.exam_score is not None and self.exam_score >= EXAM_PASS_THRESHOLD,
                "a qualified annotator must hold a passing exam score",
            )

    def ever_reached(self, state: AnnotatorState) -> bool:
        return state in self.visited

    def to_dict(self) -> dict[str, Any]:
        return {
            "annotator_id": self.annotator_id,
            "contact": self.contact,
            "clinical_background": self.clinical_background,
            "state": self.state.value,
            "exam_score": self.exam_score,
            "completed_count": self.completed_count,
            "visited": [s.value for s in self.visited],
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "Annotator":
        return Annotator(
            annotator_id=d["annotator_id"],
            contact=d.get("contact", ""),
            clinical_background=bool(d.get("clinical_background", True)),
            state=AnnotatorState(d.get("state", AnnotatorState.CONTACTED.value)),
            exam_score=d.get("exam_score"),
            completed_count=int(d.get("completed_count", 0)),
            visited=tuple(AnnotatorState(s) for s in d.get("visited", (d.get("state", "CONTACTED"),))),
        )


@dataclass(frozen=True)
class Assessment:
    """One annotator's complete rating of one clip.

    ``frame_labels`` holds one binary triple per annotated frame, in the
    canonical frame order; ``confidence`` is a single self-reported value for
    the whole clip; ``video_level`` says whether each criterion was achieved
    at any point in the clip.
    """

    clip_id: str
    annotator_id: str
    frame_labels: tuple[tuple[int, int, int], ...]
    confidence: float
    video_level: tuple[int, int, int]

    def __post_init__(self) -> None:
        _require(
            len(self.frame_labels) == len(ANNOTATED_FRAME_INDICES),
            f"expected {len(ANNOTATED_FRAME_INDICES)} frame label triples",
        )
        for triple in self.frame_labels:
            _require(
                len(triple) == 3 and all(v in (0, 1) for v in triple),
                "frame labels must be binary triples",
            )
        _require(0.0 <= self.confidence <= 1.0, "confidence must lie in [0, 1]")
        _require(
            len(self.video_level) == 3 and all(v in (0, 1) for v in self.video_level),
            "video_level must be a binary triple",
        )
        for k in range(3):
            if self.video_level[k] == 1:
                _require(
                    any(t[k] == 1 for t in self.frame_labels),
                    "a criterion achieved at video level needs a positive frame",
                )

    def to_dict(self) -> dict[str, Any]:
        return {
            "clip_id": self.clip_id,
            "annotator_id": self.annotator_id,
            "frame_labels": [list(t) for t in self.frame_labels],
            "confidence": self.confidence,
            "video_level": list(self.video_level),
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "Assessment":
        return Assessment(
            clip_id=d["clip_id"],
            annotator_id=d["annotator_id"],
            frame_labels=tuple(tuple(t) for t in d["frame_labels"]),
            confidence=float(d["confidence"]),
            video_level=tuple(d["video_level"]),
        )


@dataclass(frozen=True)
class LabelTriple:
    """Three raters' labels for one (frame, criterion) cell, with the raters'
    clip-level confidences alongside."""

    labels: tuple[int, int, int]
    confidences: tuple[float, float, float]

    def __post_init__(self) -> None:
        _require(all(v in (0, 1) for v in self.labels), "labels must be binary")
        _require(
            all(0.0 <= c <= 1.0 for c in self.confidences),
            "confidences must lie in [0, 1]",
        )


# ---------------------------------------------------------------------------
# Video lifecycle events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScreeningStarted:
    kind: ClassVar[str] = "SCREENING_STARTED"


@dataclass(frozen=True)
class PreAnnotationSubmitted:
    kind: ClassVar[str] = "PREANNOTATION_SUBMITTED"
    entry: PreAnnotation


@dataclass(frozen=True)
class ConcordanceReached:
    """Two consecutive screening verdicts agreed; carries the final one."""

    kind: ClassVar[str] = "CONCORDANCE_REACHED"
    metadata: PreAnnotation


@dataclass(frozen=True)
class BlurCompleted:
    kind: ClassVar[str] = "BLUR_COMPLETED"


@dataclass(frozen=True)
class ClipExtracted:
    kind: ClassVar[str] = "CLIP_EXTRACTED"
    clip: QualifiedClip


@dataclass(frozen=True)
class AnnotationStarted:
    kind: ClassVar[str] = "ANNOTATION_STARTED"


@dataclass(frozen=True)
class AllAssessmentsIn:
    kind: ClassVar[str] = "ALL_ASSESSMENTS_IN"


@dataclass(frozen=True)
class FusionCompleted:
    kind: ClassVar[str] = "FUSION_COMPLETED"


VideoEvent = (
    ScreeningStarted
    | PreAnnotationSubmitted
    | ConcordanceReached
    | BlurCompleted
    | ClipExtracted
    | AnnotationStarted
    | AllAssessmentsIn
    | FusionCompleted
)

# Which event kinds are legal in which state. PREANNOTATION_SUBMITTED keeps the
# case in SCREENING (the only self-loop in the machine).
VIDEO_TRANSITION_TABLE: dict[VideoState, frozenset[str]] = {
    VideoState.RECEIVED: frozenset({ScreeningStarted.kind}),
    VideoState.SCREENING: frozenset({PreAnnotationSubmitted.kind, ConcordanceReached.kind}),
    VideoState.EXCLUDED: frozenset(),
    VideoState.REPROCESSING: frozenset({BlurCompleted.kind}),
    VideoState.QUALIFIED: frozenset({ClipExtracted.kind}),
    VideoState.CLIPPED: frozenset({AnnotationStarted.kind}),
    VideoState.IN_ANNOTATION: frozenset({AllAssessmentsIn.kind}),
    VideoState.FULLY_ANNOTATED: frozenset({FusionCompleted.kind}),
    VideoState.FUSED: frozenset(),
}


def video_transition(case: VideoCase, event: VideoEvent) -> VideoCase:
    """Apply one lifecycle event to a video case.

    Returns the updated case; raises ``IllegalTransition`` when the event is
    not legal in the current state (the transition table is exhaustive).
    """
    kind = type(event).kind
    if kind not in VIDEO_TRANSITION_TABLE[case.state]:
        raise IllegalTransition(case.state, kind)

    if isinstance(event, ScreeningStarted):
        return replace(case, state=VideoState.SCREENING)

    if isinstance(event, PreAnnotationSubmitted):
        return replace(case, preannotation_chain=case.preannotation_chain + (event.entry,))

    if isinstance(event, ConcordanceReached):
        meta = event.metadata
        if not meta.eligible:
            return replace(
                case,
                state=VideoState.EXCLUDED,
                exclusion_reason=meta.exclusion_reason,
            )
        target = VideoState.REPROCESSING if meta.needs_blur else VideoState.QUALIFIED
        return replace(case, state=target, final_metadata=meta)

    if isinstance(event, BlurCompleted):
        return replace(case, state=VideoState.QUALIFIED)

    if isinstance(event, ClipExtracted):
        return replace(case, state=VideoState.CLIPPED, clip=event.clip)

    if isinstance(event, AnnotationStarted):
        return replace(case, state=VideoState.IN_ANNOTATION)

    if isinstance(event, AllAssessmentsIn):
        return replace(case, state=VideoState.FULLY_ANNOTATED)

    if isinstance(event, FusionCompleted):
        return replace(case, state=VideoState.FUSED)

    raise IllegalTransition(case.state, kind)  # pragma: no cover


# ---------------------------------------------------------------------------
# Annotator lifecycle events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EligibilityPassed:
    kind: ClassVar[str] = "ELIGIBILITY_PASSED"


@dataclass(frozen=True)
class EligibilityRejected:
    kind: ClassVar[str] = "ELIGIBILITY_REJECTED"
    reason: str = "no clinical background"


@dataclass(frozen=True)
class TrainingStarted:
    kind: ClassVar[str] = "TRAINING_STARTED"


@dataclass(frozen=True)
class ExamSubmitted:
    kind: ClassVar[str] = "EXAM_SUBMITTED"
    score: float


@dataclass(frozen=True)
class ExamGraded:
    kind: ClassVar[str] = "EXAM_GRADED"


@dataclass(frozen=True)
class Activated:
    kind: ClassVar[str] = "ACTIVATED"


@dataclass(frozen=True)
class Paused:
    kind: ClassVar[str] = "PAUSED"


@dataclass(frozen=True)
class Resumed:
    kind: ClassVar[str] = "RESUMED"


@dataclass(frozen=True)
class DroppedOut:
    kind: ClassVar[str] = "DROPPED_OUT"


AnnotatorEvent = (
    EligibilityPassed
    | EligibilityRejected
    | TrainingStarted
    | ExamSubmitted
    | ExamGraded
    | Activated
    | Paused
    | Resumed
    | DroppedOut
)

ANNOTATOR_TRANSITION_TABLE: dict[AnnotatorState, frozenset[str]] = {
    AnnotatorState.CONTACTED: frozenset(
        {EligibilityPassed.kind, EligibilityRejected.kind, DroppedOut.kind}
    ),
    AnnotatorState.INELIGIBLE: frozenset(),
    AnnotatorState.ELIGIBLE: frozenset({TrainingStarted.kind, DroppedOut.kind}),
    AnnotatorState.TRAINING: frozenset({ExamSubmitted.kind, DroppedOut.kind}),
    AnnotatorState.EXAM_TAKEN: frozenset({ExamGraded.kind, DroppedOut.kind}),
    AnnotatorState.QUALIFIED: frozenset({Activated.kind, DroppedOut.kind}),
    AnnotatorState.FAILED: frozenset(),
    AnnotatorState.ACTIVE: frozenset({Paused.kind, DroppedOut.kind}),
    AnnotatorState.PAUSED: frozenset({Resumed.kind, DroppedOut.kind}),
    AnnotatorState.DROPPED: frozenset(),
}


def annotator_transition(annotator: Annotator, event: AnnotatorEvent) -> Annotator:
    """Apply one lifecycle event to an annotator, tracking visited states."""
    kind = type(event).kind
    if kind not in ANNOTATOR_TRANSITION_TABLE[annotator.state]:
        raise IllegalTransition(annotator.state, kind)

    def goto(state: AnnotatorState, **changes: Any) -> Annotator:
        return replace(
            annotator,
            state=state,
            visited=annotator.visited + (state,),
            **changes,
        )

    if isinstance(event, EligibilityPassed):
        return goto(AnnotatorState.ELIGIBLE)
    if isinstance(event, EligibilityRejected):
        return goto(AnnotatorState.INELIGIBLE)
    if isinstance(event, TrainingStarted):
        return goto(AnnotatorState.TRAINING)
    if isinstance(event, ExamSubmitted):
        _require(0.0 <= event.score <= 1.0, "exam score must lie in [0, 1]")
        return goto(AnnotatorState.EXAM_TAKEN, exam_score=event.score)
    if isinstance(event, ExamGraded):
        if annotator.exam_score is None:  # pragma: no cover - EXAM_TAKEN implies a score
            raise IllegalTransition(annotator.state, kind)
        passed = annotator.exam_score >= EXAM_PASS_THRESHOLD
        return goto(AnnotatorState.QUALIFIED if passed else AnnotatorState.FAILED)
    if isinstance(event, Activated):
        return goto(AnnotatorState.ACTIVE)
    if isinstance(event, Paused):
        return goto(AnnotatorState.PAUSED)
    if isinstance(event, Resumed):
        return goto(AnnotatorState.ACTIVE)
    if isinstance(event, DroppedOut):
        return goto(AnnotatorState.DROPPED)

    raise IllegalTransition(annotator.state, kind)  # pragma: no cover


# ---------------------------------------------------------------------------
# Event codec (used by the event log and by JSONL exports)
# ---------------------------------------------------------------------------

_EVENT_CLASSES: tuple[type, ...] = (
    ScreeningStarted,
    PreAnnotationSubmitted,
    ConcordanceReached,
    BlurCompleted,
    ClipExtracted,
    AnnotationStarted,
    AllAssessmentsIn,
    FusionCompleted,
    EligibilityPassed,
    EligibilityRejected,
    TrainingStarted,
    ExamSubmitted,
    ExamGraded,
    Activated,
    Paused,
    Resumed,
    DroppedOut,
)

_EVENT_BY_KIND: dict[str, type] = {cls.kind: cls for cls in _EVENT_CLASSES}


def encode_event(event: VideoEvent | AnnotatorEvent) -> dict[str, Any]:
    out: dict[str, Any] = {"kind": type(event).kind}
    if isinstance(event, PreAnnotationSubmitted):
        out["entry"] = event.entry.to_dict()
    elif isinstance(event, ConcordanceReached):
        out["metadata"] = event.metadata.to_dict()
    elif isinstance(event, ClipExtracted):
        out["clip"] = event.clip.to_dict()
    elif isinstance(event, ExamSubmitted):
        out["score"] = event.score
    elif isinstance(event, EligibilityRejected):
        out["reason"] = event.reason
    return out


def decode_event(d: Mapping[str, Any]) -> VideoEvent | AnnotatorEvent:
    kind = d["kind"]
    cls = _EVENT_BY_KIND.get(kind)
    if cls is None:
        raise ValidationError(f"unknown event kind {kind!r}")
    if cls is PreAnnotationSubmitted:
        return PreAnnotationSubmitted(entry=PreAnnotation.from_dict(d["entry"]))
    if cls is ConcordanceReached:
        return ConcordanceReached(metadata=PreAnnotation.from_dict(d["metadata"]))
    if cls is ClipExtracted:
        return ClipExtracted(clip=QualifiedClip.from_dict(d["clip"]))
    if cls is ExamSubmitted:
        return ExamSubmitted(score=float(d["score"]))
    if cls is EligibilityRejected:
        return EligibilityRejected(reason=d.get("reason", "no clinical background"))
    return cls()

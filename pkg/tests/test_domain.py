"""State machines, validation rules, and codec round-trips."""

from __future__ import annotations

import random

import pytest

from cvsops.domain import (
    ANNOTATOR_TRANSITION_TABLE,
    EXAM_PASS_THRESHOLD,
    VIDEO_TRANSITION_TABLE,
    Activated,
    AllAssessmentsIn,
    AnnotationStarted,
    Annotator,
    AnnotatorState,
    Assessment,
    BlurCompleted,
    CaseProvenance,
    ClipExtracted,
    ConcordanceReached,
    DroppedOut,
    EligibilityPassed,
    EligibilityRejected,
    ExamGraded,
    ExamSubmitted,
    ExclusionReason,
    FusionCompleted,
    IllegalTransition,
    Paused,
    PreAnnotation,
    PreAnnotationSubmitted,
    QualifiedClip,
    Resumed,
    ScreeningStarted,
    SurgicalApproach,
    TrainingStarted,
    ValidationError,
    VideoCase,
    VideoState,
    annotator_transition,
    decode_event,
    encode_event,
    video_transition,
)

from conftest import random_assessment


def make_provenance(**overrides):
    base = dict(
        country="country-01",
        device_vendor="vendor-A",
        approach=SurgicalApproach.LAPAROSCOPIC,
        used_ioc=False,
        used_icg=False,
    )
    base.update(overrides)
    return CaseProvenance(**base)


def make_case(state=VideoState.RECEIVED, **overrides):
    base = dict(
        case_id="case-1",
        media_uri="file:///pool/case-1.mp4",
        duration_s=3600.0,
        provenance=make_provenance(),
        state=state,
    )
    base.update(overrides)
    return VideoCase(**base)


def eligible_verdict(rater="dr-a", ts=400.0, **overrides):
    base = dict(
        rater_id=rater,
        eligible=True,
        exclusion_reason=None,
        clipping_timestamp=ts,
        used_ioc=False,
        used_icg=False,
        approach=SurgicalApproach.LAPAROSCOPIC,
    )
    base.update(overrides)
    return PreAnnotation(**base)


def make_clip(case_id="case-1", start=310.0):
    return QualifiedClip(
        clip_id=f"clip-{case_id}",
        case_id=case_id,
        media_uri=f"file:///pool/{case_id}.mp4#t=310,400",
        window_start_s=start,
        window_end_s=start + 90.0,
    )


def sample_video_event(kind: str):
    return {
        "SCREENING_STARTED": ScreeningStarted(),
        "PREANNOTATION_SUBMITTED": PreAnnotationSubmitted(entry=eligible_verdict()),
        "CONCORDANCE_REACHED": ConcordanceReached(metadata=eligible_verdict()),
        "BLUR_COMPLETED": BlurCompleted(),
        "CLIP_EXTRACTED": ClipExtracted(clip=make_clip()),
        "ANNOTATION_STARTED": AnnotationStarted(),
        "ALL_ASSESSMENTS_IN": AllAssessmentsIn(),
        "FUSION_COMPLETED": FusionCompleted(),
    }[kind]


def sample_annotator_event(kind: str):
    return {
        "ELIGIBILITY_PASSED": EligibilityPassed(),
        "ELIGIBILITY_REJECTED": EligibilityRejected(),
        "TRAINING_STARTED": TrainingStarted(),
        "EXAM_SUBMITTED": ExamSubmitted(score=0.8),
        "EXAM_GRADED": ExamGraded(),
        "ACTIVATED": Activated(),
        "PAUSED": Paused(),
        "RESUMED": Resumed(),
        "DROPPED_OUT": DroppedOut(),
    }[kind]


class TestVideoMachine:
    def test_happy_path_to_fused(self):
        case = make_case()
        case = video_transition(case, ScreeningStarted())
        case = video_transition(case, PreAnnotationSubmitted(entry=eligible_verdict("dr-a")))
        case = video_transition(case, PreAnnotationSubmitted(entry=eligible_verdict("dr-b")))
        assert case.state is VideoState.SCREENING
        assert len(case.preannotation_chain) == 2
        case = video_transition(case, ConcordanceReached(metadata=case.preannotation_chain[-1]))
        assert case.state is VideoState.QUALIFIED
        assert case.final_metadata is not None
        assert case.final_metadata.rater_id == "dr-b"
        case = video_transition(case, ClipExtracted(clip=make_clip()))
        case = video_transition(case, AnnotationStarted())
        case = video_transition(case, AllAssessmentsIn())
        case = video_transition(case, FusionCompleted())
        assert case.state is VideoState.FUSED

    def test_blur_detour(self):
        verdict = eligible_verdict(needs_blur=True)
        case = make_case(state=VideoState.SCREENING)
        case = video_transition(case, ConcordanceReached(metadata=verdict))
        assert case.state is VideoState.REPROCESSING
        case = video_transition(case, BlurCompleted())
        assert case.state is VideoState.QUALIFIED

    def test_exclusion_records_reason(self):
        verdict = PreAnnotation(
            rater_id="dr-a",
            eligible=False,
            exclusion_reason=ExclusionReason.BAILOUT,
            clipping_timestamp=None,
            used_ioc=False,
            used_icg=False,
            approach=SurgicalApproach.LAPAROSCOPIC,
            bailout=True,
        )
        case = make_case(state=VideoState.SCREENING)
        case = video_transition(case, ConcordanceReached(metadata=verdict))
        assert case.state is VideoState.EXCLUDED
        assert case.exclusion_reason is ExclusionReason.BAILOUT
        assert case.final_metadata is None

    def test_every_disallowed_pair_raises(self):
        """Exhaustive sweep: any event kind missing from a state's row must
        raise, and any allowed kind must not."""
        all_kinds = sorted({k for kinds in VIDEO_TRANSITION_TABLE.values() for k in kinds})
        for state, allowed in VIDEO_TRANSITION_TABLE.items():
            for kind in all_kinds:
                case = make_case(state=state)
                event = sample_video_event(kind)
                if kind in allowed:
                    video_transition(case, event)
                else:
                    with pytest.raises(IllegalTransition):
                        video_transition(case, event)

    def test_terminal_states_accept_nothing(self):
        assert VIDEO_TRANSITION_TABLE[VideoState.EXCLUDED] == frozenset()
        assert VIDEO_TRANSITION_TABLE[VideoState.FUSED] == frozenset()


class TestAnnotatorMachine:
    def test_happy_path_to_active(self):
        a = Annotator(annotator_id="ann-1")
        for event in (
            EligibilityPassed(),
            TrainingStarted(),
            ExamSubmitted(score=0.9),
            ExamGraded(),
            Activated(),
        ):
            a = annotator_transition(a, event)
        assert a.state is AnnotatorState.ACTIVE
        assert a.exam_score == 0.9
        assert AnnotatorState.QUALIFIED in a.visited

    def test_exam_threshold_boundary(self):
        def grade(score):
            a = Annotator(annotator_id="ann-1", state=AnnotatorState.TRAINING)
            a = annotator_transition(a, ExamSubmitted(score=score))
            return annotator_transition(a, ExamGraded()).state

        assert grade(EXAM_PASS_THRESHOLD) is AnnotatorState.QUALIFIED
        assert grade(EXAM_PASS_THRESHOLD - 1e-9) is AnnotatorState.FAILED
        assert grade(1.0) is AnnotatorState.QUALIFIED
        assert grade(0.0) is AnnotatorState.FAILED

    def test_pause_resume_round_trip(self):
        a = Annotator(annotator_id="ann-1", state=AnnotatorState.ACTIVE)
        a = annotator_transition(a, Paused())
        assert a.state is AnnotatorState.PAUSED
        a = annotator_transition(a, Resumed())
        assert a.state is AnnotatorState.ACTIVE

    def test_dropout_allowed_from_every_live_state(self):
        terminal = {
            AnnotatorState.INELIGIBLE,
            AnnotatorState.FAILED,
            AnnotatorState.DROPPED,
        }
        for state, allowed in ANNOTATOR_TRANSITION_TABLE.items():
            if state in terminal:
                assert DroppedOut.kind not in allowed
            else:
                assert DroppedOut.kind in allowed

    def test_every_disallowed_pair_raises(self):
        all_kinds = sorted({k for kinds in ANNOTATOR_TRANSITION_TABLE.values() for k in kinds})
        for state, allowed in ANNOTATOR_TRANSITION_TABLE.items():
            for kind in all_kinds:
                a = Annotator(annotator_id="ann-1", state=state, exam_score=0.8)
                event = sample_annotator_event(kind)
                if kind in allowed:
                    annotator_transition(a, event)
                else:
                    with pytest.raises(IllegalTransition):
                        annotator_transition(a, event)

    def test_visited_trail_grows_monotonically(self):
        a = Annotator(annotator_id="ann-1")
        trail = [a.state]
        for event in (EligibilityPassed(), TrainingStarted(), DroppedOut()):
            a = annotator_transition(a, event)
            trail.append(a.state)
        assert list(a.visited) == trail
        assert a.visited[-1] is AnnotatorState.DROPPED


class TestValidation:
    def test_assessment_frame_count(self):
        with pytest.raises(ValidationError):
            Assessment(
                clip_id="c",
                annotator_id="a",
                frame_labels=((0, 0, 0),) * 5,
                confidence=0.5,
                video_level=(0, 0, 0),
            )

    def test_assessment_rejects_non_binary_labels(self):
        frames = [[0, 0, 0]] * 18
        frames[3] = [0, 2, 0]
        with pytest.raises(ValidationError):
            Assessment(
                clip_id="c",
                annotator_id="a",
                frame_labels=tuple(tuple(r) for r in frames),
                confidence=0.5,
                video_level=(0, 0, 0),
            )

    def test_assessment_confidence_bounds(self):
        for bad in (-0.01, 1.01):
            with pytest.raises(ValidationError):
                Assessment(
                    clip_id="c",
                    annotator_id="a",
                    frame_labels=((0, 0, 0),) * 18,
                    confidence=bad,
                    video_level=(0, 0, 0),
                )

    def test_video_level_positive_needs_a_positive_frame(self):
        with pytest.raises(ValidationError):
            Assessment(
                clip_id="c",
                annotator_id="a",
                frame_labels=((0, 0, 0),) * 18,
                confidence=0.5,
                video_level=(1, 0, 0),
            )

    def test_preannotation_eligibility_consistency(self):
        with pytest.raises(ValidationError):
            eligible_verdict(exclusion_reason=ExclusionReason.BAILOUT)
        with pytest.raises(ValidationError):
            PreAnnotation(
                rater_id="dr-a",
                eligible=False,
                exclusion_reason=None,
                clipping_timestamp=None,
                used_ioc=False,
                used_icg=False,
                approach=SurgicalApproach.LAPAROSCOPIC,
            )

    def test_preannotation_eligible_needs_late_timestamp(self):
        with pytest.raises(ValidationError):
            eligible_verdict(ts=89.9)
        eligible_verdict(ts=90.0)  # boundary is allowed

    def test_clip_window_must_span_90s(self):
        with pytest.raises(ValidationError):
            QualifiedClip(
                clip_id="c",
                case_id="case-1",
                media_uri="file:///x.mp4",
                window_start_s=0.0,
                window_end_s=89.0,
            )


class TestCodecs:
    def test_every_event_kind_round_trips(self):
        video_kinds = {k for kinds in VIDEO_TRANSITION_TABLE.values() for k in kinds}
        annotator_kinds = {k for kinds in ANNOTATOR_TRANSITION_TABLE.values() for k in kinds}
        events = [sample_video_event(k) for k in sorted(video_kinds)]
        events += [sample_annotator_event(k) for k in sorted(annotator_kinds)]
        for event in events:
            assert decode_event(encode_event(event)) == event

    def test_decode_rejects_unknown_kind(self):
        with pytest.raises(ValidationError):
            decode_event({"kind": "NOT_A_THING"})

    def test_video_case_round_trip(self):
        case = make_case(
            state=VideoState.QUALIFIED,
            split="train",
            preannotation_chain=(eligible_verdict("dr-a"), eligible_verdict("dr-b")),
            final_metadata=eligible_verdict("dr-b"),
            clip=make_clip(),
        )
        assert VideoCase.from_dict(case.to_dict()) == case

    def test_annotator_round_trip(self):
        a = Annotator(
            annotator_id="ann-1",
            contact="ann-1@example.org",
            state=AnnotatorState.ACTIVE,
            exam_score=0.85,
            completed_count=12,
            visited=(AnnotatorState.ELIGIBLE, AnnotatorState.ACTIVE),
        )
        assert Annotator.from_dict(a.to_dict()) == a

    def test_assessment_round_trip_random(self):
        rng = random.Random(7)
        for _ in range(50):
            a = random_assessment(rng)
            assert Assessment.from_dict(a.to_dict()) == a

    def test_provenance_none_fields_survive(self):
        p = make_provenance(country=None, device_vendor=None)
        back = CaseProvenance.from_dict(p.to_dict())
        assert back.country is None
        assert back.device_vendor is None

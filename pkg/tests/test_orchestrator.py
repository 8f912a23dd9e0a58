"""Event sourcing: command chaining, replay, snapshots, effects, recovery."""

from __future__ import annotations

import json
import random
from datetime import datetime, timedelta, timezone

import pytest

from cvsops.config import PlatformConfig
from cvsops.domain import (
    Activated,
    Annotator,
    AnnotatorState,
    DroppedOut,
    EligibilityPassed,
    ExamSubmitted,
    ExclusionReason,
    TrainingStarted,
    VideoState,
)
from cvsops.orchestrator import (
    DuplicateEntity,
    EffectKind,
    EffectStatus,
    MemoryNotifier,
    Orchestrator,
    SequenceGap,
    replay,
)
from cvsops.scheduling import DuplicateAssessment, UnknownAssignment

from conftest import random_assessment
from test_domain import eligible_verdict, make_case

T0 = datetime(2026, 3, 2, 9, 0, tzinfo=timezone.utc)


class StepClock:
    """A deterministic clock the tests advance by hand."""

    def __init__(self, start: datetime = T0):
        self.now = start

    def __call__(self) -> datetime:
        return self.now

    def advance(self, **kwargs) -> datetime:
        self.now += timedelta(**kwargs)
        return self.now


def new_orchestrator(tmp_path=None, **config_overrides):
    clock = StepClock()
    config = PlatformConfig(**config_overrides)
    orch = Orchestrator(
        config=config,
        notifier=MemoryNotifier(),
        clock=clock,
        store_dir=tmp_path,
    )
    return orch, clock


def activate(orch: Orchestrator, annotator_id: str) -> None:
    orch.register_annotator(Annotator(annotator_id))
    orch.annotator_event(annotator_id, EligibilityPassed())
    orch.annotator_event(annotator_id, TrainingStarted())
    orch.annotator_event(annotator_id, ExamSubmitted(score=0.9))  # grading chains
    orch.annotator_event(annotator_id, Activated())


def qualify_case(orch: Orchestrator, case_id: str, ts: float = 412.0) -> None:
    orch.intake_case(make_case(case_id=case_id, media_uri=f"media://{case_id}"))
    orch.start_screening(case_id)
    orch.submit_screening_verdict(case_id, eligible_verdict("dr-a", ts=ts))
    orch.submit_screening_verdict(case_id, eligible_verdict("dr-b", ts=ts + 0.5))
    orch.extract_clip(case_id)


def complete_all_outstanding(orch: Orchestrator, rng: random.Random) -> None:
    for assignment in orch.state.coverage.outstanding_assignments():
        orch.accept_assessment(
            random_assessment(
                rng, clip_id=assignment.clip_id, annotator_id=assignment.annotator_id
            )
        )


def run_small_campaign(tmp_path=None, n_cases: int = 3):
    """Three cases all the way to fused labels; returns the orchestrator."""
    orch, clock = new_orchestrator(tmp_path)
    rng = random.Random(99)
    for a in ("ann-a", "ann-b", "ann-c"):
        activate(orch, a)
    for i in range(1, n_cases + 1):
        qualify_case(orch, f"case-{i:04d}")
    orch.run_tick(now=clock.now, seed=5)
    complete_all_outstanding(orch, rng)
    clock.advance(seconds=1)
    orch.run_due_effects(clock.now)
    return orch, clock, rng


class TestCommandChaining:
    def test_full_pipeline_reaches_fused(self):
        orch, _, _ = run_small_campaign()
        for case in orch.state.videos.values():
            assert case.state is VideoState.FUSED
        assert set(orch.state.fused) == set(orch.state.clips)
        assert orch.state.coverage.fully_annotated() == sorted(orch.state.clips)

    def test_video_log_tells_the_whole_story(self):
        orch, _, _ = run_small_campaign(n_cases=1)
        kinds = [
            e.payload["kind"]
            for e in orch.log
            if e.entity_kind == "video" and e.entity_id == "case-0001"
        ]
        assert kinds == [
            "CASE_RECEIVED",
            "SCREENING_STARTED",
            "PREANNOTATION_SUBMITTED",
            "PREANNOTATION_SUBMITTED",
            "CONCORDANCE_REACHED",
            "CLIP_EXTRACTED",
            "ANNOTATION_STARTED",
            "ALL_ASSESSMENTS_IN",
            "FUSION_COMPLETED",
        ]

    def test_disagreement_pulls_a_third_verdict(self):
        orch, _ = new_orchestrator()
        case_id = "case-0001"
        orch.intake_case(make_case(case_id=case_id))
        orch.start_screening(case_id)
        orch.submit_screening_verdict(case_id, eligible_verdict("dr-a", ts=400.0))
        orch.submit_screening_verdict(case_id, eligible_verdict("dr-b", ts=500.0))
        assert orch.state.videos[case_id].state is VideoState.SCREENING
        orch.submit_screening_verdict(case_id, eligible_verdict("dr-c", ts=500.4))
        assert orch.state.videos[case_id].state is VideoState.QUALIFIED

    def test_exam_grading_is_chained(self):
        orch, _ = new_orchestrator()
        orch.register_annotator(Annotator("ann-x"))
        orch.annotator_event("ann-x", EligibilityPassed())
        orch.annotator_event("ann-x", TrainingStarted())
        graded = orch.annotator_event("ann-x", ExamSubmitted(score=0.74))
        assert graded.state is AnnotatorState.FAILED
        kinds = [e.payload["kind"] for e in orch.log if e.entity_id == "ann-x"]
        assert kinds[-2:] == ["EXAM_SUBMITTED", "EXAM_GRADED"]

    def test_duplicate_intake_rejected_and_logged(self, tmp_path):
        orch, _ = new_orchestrator(tmp_path)
        orch.intake_case(make_case(case_id="case-0001"))
        before = len(orch.log)
        with pytest.raises(DuplicateEntity):
            orch.intake_case(make_case(case_id="case-0001"))
        assert len(orch.log) == before
        entries = [
            json.loads(line)
            for line in (tmp_path / "errors.jsonl").read_text().splitlines()
        ]
        assert entries[-1]["event_kind"] == "CASE_RECEIVED"
        assert "DuplicateEntity" in entries[-1]["error"]

    def test_blind_payload_requires_an_outstanding_assignment(self):
        orch, clock = new_orchestrator()
        for a in ("ann-a", "ann-b", "ann-c"):
            activate(orch, a)
        qualify_case(orch, "case-0001")
        with pytest.raises(UnknownAssignment):
            orch.blind_payload("ann-a", "clip-case-0001")
        orch.run_tick(now=clock.now, seed=1)
        view = orch.blind_payload("ann-a", "clip-case-0001")
        assert set(view.to_dict()) == {"clip_id", "media_uri", "frame_indices"}
        orch.accept_assessment(
            random_assessment(random.Random(1), "clip-case-0001", "ann-a")
        )
        with pytest.raises(UnknownAssignment):
            orch.blind_payload("ann-a", "clip-case-0001")


class TestIdempotency:
    def test_assessment_retry_returns_first_result(self):
        orch, clock = new_orchestrator()
        for a in ("ann-a", "ann-b", "ann-c"):
            activate(orch, a)
        qualify_case(orch, "case-0001")
        orch.run_tick(now=clock.now, seed=2)
        assessment = random_assessment(random.Random(3), "clip-case-0001", "ann-a")
        first = orch.accept_assessment(assessment, idempotency_key="submit-1")
        log_len = len(orch.log)
        again = orch.accept_assessment(assessment, idempotency_key="submit-1")
        assert again is first
        assert len(orch.log) == log_len

    def test_resubmission_without_key_is_a_duplicate(self):
        orch, clock = new_orchestrator()
        for a in ("ann-a", "ann-b", "ann-c"):
            activate(orch, a)
        qualify_case(orch, "case-0001")
        orch.run_tick(now=clock.now, seed=2)
        assessment = random_assessment(random.Random(3), "clip-case-0001", "ann-a")
        orch.accept_assessment(assessment, idempotency_key="submit-1")
        with pytest.raises(DuplicateAssessment):
            orch.accept_assessment(assessment, idempotency_key="submit-2")

    def test_completion_signal_and_fusion_effect(self):
        orch, clock = new_orchestrator()
        for a in ("ann-a", "ann-b", "ann-c"):
            activate(orch, a)
        qualify_case(orch, "case-0001")
        orch.run_tick(now=clock.now, seed=2)
        rng = random.Random(4)
        results = [
            orch.accept_assessment(random_assessment(rng, "clip-case-0001", a))
            for a in ("ann-a", "ann-b", "ann-c")
        ]
        assert [r["clip_completed"] for r in results] == [False, False, True]
        pending = [e for e in orch.effects if e.kind is EffectKind.FUSE_CLIP]
        assert len(pending) == 1
        assert pending[0].payload == {"clip_id": "clip-case-0001"}


class TestReplay:
    def test_rebuild_from_log_matches_live_state(self):
        orch, _, _ = run_small_campaign()
        rebuilt = Orchestrator.from_log(orch.log, config=orch.config)
        assert rebuilt.state.to_dict() == orch.state.to_dict()

    def test_replay_is_a_pure_fold(self):
        # Replaying must not queue effects or touch the notifier.
        orch, _, _ = run_small_campaign()
        rebuilt = Orchestrator.from_log(orch.log, config=orch.config)
        assert rebuilt.effects == []
        assert rebuilt.notifier.sent == []

    def test_sequence_gap_rejected(self):
        orch, _, _ = run_small_campaign(n_cases=1)
        events = list(orch.log)
        with pytest.raises(SequenceGap):
            replay(events[:3] + events[4:])
        with pytest.raises(SequenceGap):
            replay(events[1:])

    def test_random_campaigns_replay_identically(self):
        for seed in (11, 23, 47, 61, 89):
            orch = self.random_campaign(seed)
            again = self.random_campaign(seed)
            assert [e.to_dict() for e in orch.log] == [e.to_dict() for e in again.log]
            rebuilt = Orchestrator.from_log(orch.log, config=orch.config)
            assert rebuilt.state.to_dict() == orch.state.to_dict()

    def random_campaign(self, seed: int) -> Orchestrator:
        """A legal but messy campaign: exclusions, blur detours, disagreeing
        screeners, dropouts, partial completions."""
        rng = random.Random(seed)
        orch, clock = new_orchestrator()
        team = [f"ann-{i}" for i in range(rng.randint(3, 5))]
        for a in team:
            activate(orch, a)

        for i in range(1, rng.randint(4, 8)):
            case_id = f"case-{i:04d}"
            orch.intake_case(make_case(case_id=case_id, media_uri=f"media://{case_id}"))
            orch.start_screening(case_id)
            roll = rng.random()
            if roll < 0.2:
                verdict = dict(
                    eligible=False,
                    exclusion_reason=ExclusionReason.NO_CONTINUOUS_90S,
                    ts=None,
                )
                orch.submit_screening_verdict(
                    case_id,
                    eligible_verdict("dr-a", **verdict),
                )
                orch.submit_screening_verdict(
                    case_id,
                    eligible_verdict("dr-b", **verdict),
                )
                continue
            ts = rng.uniform(120.0, 3000.0)
            needs_blur = roll < 0.4
            if rng.random() < 0.3:
                orch.submit_screening_verdict(
                    case_id, eligible_verdict("dr-a", ts=ts + 100.0)
                )
                orch.submit_screening_verdict(
                    case_id, eligible_verdict("dr-b", ts=ts, needs_blur=needs_blur)
                )
                orch.submit_screening_verdict(
                    case_id, eligible_verdict("dr-c", ts=ts + 0.5, needs_blur=needs_blur)
                )
            else:
                orch.submit_screening_verdict(
                    case_id, eligible_verdict("dr-a", ts=ts, needs_blur=needs_blur)
                )
                orch.submit_screening_verdict(
                    case_id, eligible_verdict("dr-b", ts=ts - 1.0, needs_blur=needs_blur)
                )
            if needs_blur:
                orch.complete_blur(case_id)
            orch.extract_clip(case_id)

        for tick in range(3):
            clock.advance(days=14)
            orch.run_tick(now=clock.now)
            if rng.random() < 0.3 and len(team) > 3:
                quitter = team.pop(rng.randrange(len(team)))
                orch.annotator_event(quitter, DroppedOut())
            outstanding = orch.state.coverage.outstanding_assignments()
            rng.shuffle(outstanding)
            for assignment in outstanding:
                worker = orch.state.annotators[assignment.annotator_id]
                if worker.state is not AnnotatorState.ACTIVE:
                    continue
                if rng.random() < 0.8:
                    orch.accept_assessment(
                        random_assessment(
                            rng, assignment.clip_id, assignment.annotator_id
                        )
                    )
            clock.advance(seconds=5)
            orch.run_due_effects(clock.now)
        return orch

    def test_dropout_revocation_is_evented(self):
        orch, clock = new_orchestrator()
        for a in ("ann-a", "ann-b", "ann-c", "ann-d"):
            activate(orch, a)
        for i in range(1, 4):
            qualify_case(orch, f"case-{i:04d}")
        orch.run_tick(now=clock.now, seed=1)
        orch.annotator_event("ann-d", DroppedOut())
        clock.advance(days=14)
        orch.run_tick(now=clock.now, seed=2)
        revocations = [
            e for e in orch.log if e.payload["kind"] == "ASSIGNMENTS_REVOKED"
        ]
        assert len(revocations) == 1
        assert all(
            a["annotator_id"] == "ann-d" for a in revocations[0].payload["assignments"]
        )
        outstanding = orch.state.coverage.outstanding_assignments()
        assert all(a.annotator_id != "ann-d" for a in outstanding)
        rebuilt = Orchestrator.from_log(orch.log, config=orch.config)
        assert rebuilt.state.to_dict() == orch.state.to_dict()


class TestSnapshots:
    def command_script(self, orch: Orchestrator, clock: StepClock):
        """The campaign as a list of steps so tests can snapshot anywhere."""
        steps = []
        for a in ("ann-a", "ann-b", "ann-c"):
            steps.append(lambda a=a: activate(orch, a))
        for i in range(1, 4):
            steps.append(lambda i=i: qualify_case(orch, f"case-{i:04d}"))
        steps.append(lambda: orch.run_tick(now=clock.now, seed=5))
        rng = random.Random(17)

        def complete_and_fuse():
            complete_all_outstanding(orch, rng)
            clock.advance(seconds=1)
            orch.run_due_effects(clock.now)

        steps.append(complete_and_fuse)
        return steps

    def test_snapshot_plus_tail_equals_full_replay(self, tmp_path):
        for k_choice in range(3):
            store = tmp_path / f"store-{k_choice}"
            orch, clock = new_orchestrator(store)
            steps = self.command_script(orch, clock)
            k = random.Random(k_choice).randrange(1, len(steps))
            for step in steps[:k]:
                step()
            orch.write_snapshot()
            effects_at_snapshot = [e.to_dict() for e in orch.effects]
            for step in steps[k:]:
                step()

            recovered = Orchestrator.load(store, config=orch.config)
            assert recovered.state.to_dict() == orch.state.to_dict()
            assert recovered._seqs == orch._seqs
            # Effects travel through snapshots only; the tail replay is pure.
            assert [e.to_dict() for e in recovered.effects] == effects_at_snapshot

    def test_corrupt_snapshot_falls_back_to_full_replay(self, tmp_path):
        orch, _, _ = run_small_campaign(tmp_path)
        (tmp_path / "snapshot.json").write_text("{ not json", encoding="utf-8")
        recovered = Orchestrator.load(tmp_path, config=orch.config)
        assert recovered.state.to_dict() == orch.state.to_dict()

    def test_wrong_snapshot_version_falls_back(self, tmp_path):
        orch, _, _ = run_small_campaign(tmp_path)
        snap = orch.snapshot()
        snap["version"] = 2
        (tmp_path / "snapshot.json").write_text(json.dumps(snap), encoding="utf-8")
        recovered = Orchestrator.load(tmp_path, config=orch.config)
        assert recovered.state.to_dict() == orch.state.to_dict()

    def test_load_without_snapshot_replays_the_log(self, tmp_path):
        orch, _, _ = run_small_campaign(tmp_path)
        assert not (tmp_path / "snapshot.json").exists()
        recovered = Orchestrator.load(tmp_path, config=orch.config)
        assert recovered.state.to_dict() == orch.state.to_dict()
        assert recovered.log == orch.log

    def test_snapshot_dedupe_cache_survives_recovery(self, tmp_path):
        orch, clock = new_orchestrator(tmp_path)
        for a in ("ann-a", "ann-b", "ann-c"):
            activate(orch, a)
        qualify_case(orch, "case-0001")
        orch.run_tick(now=clock.now, seed=2)
        assessment = random_assessment(random.Random(3), "clip-case-0001", "ann-a")
        first = orch.accept_assessment(assessment, idempotency_key="submit-1")
        orch.write_snapshot()

        recovered = Orchestrator.load(tmp_path, config=orch.config)
        log_len = len(recovered.log)
        again = recovered.accept_assessment(assessment, idempotency_key="submit-1")
        assert again == first
        assert len(recovered.log) == log_len


class TestEffects:
    def test_not_due_effects_wait(self):
        orch, clock = new_orchestrator()
        orch.queue_effect(
            EffectKind.NOTIFY_ORGANIZER, {"message": "hi"}, due_at=clock.now + timedelta(hours=1)
        )
        assert orch.run_due_effects(clock.now) == []
        assert orch.notifier.sent == []
        clock.advance(hours=1)
        executed = orch.run_due_effects(clock.now)
        assert [e.status for e in executed] == [EffectStatus.DONE]
        assert len(orch.notifier.sent) == 1

    def test_failure_backoff_schedule(self):
        # A fusion effect for a clip with no ratings keeps failing.
        orch, clock = new_orchestrator()
        effect = orch.queue_effect(
            EffectKind.FUSE_CLIP, {"clip_id": "clip-missing"}, due_at=clock.now
        )
        orch.run_due_effects(clock.now)
        assert effect.status is EffectStatus.PENDING
        assert effect.attempts == 1
        assert effect.due_at == clock.now + timedelta(seconds=3600)
        assert "FusionInputError" in effect.last_error

        clock.advance(seconds=3600)
        orch.run_due_effects(clock.now)
        assert effect.attempts == 2
        assert effect.due_at == clock.now + timedelta(seconds=7200)

        clock.advance(seconds=7200)
        orch.run_due_effects(clock.now)
        assert effect.attempts == 3
        assert effect.status is EffectStatus.FAILED
        failures = [e for e in orch.errors if e["entity_kind"] == "effect"]
        assert len(failures) == 3

    def test_fails_twice_then_succeeds(self):
        class FlakyNotifier:
            def __init__(self, failures: int):
                self.failures = failures
                self.inner = MemoryNotifier()

            def send(self, idempotency_key: str, target: str, message: str) -> None:
                if self.failures > 0:
                    self.failures -= 1
                    raise ConnectionError("mail relay down")
                self.inner.send(idempotency_key, target, message)

        clock = StepClock()
        notifier = FlakyNotifier(failures=2)
        orch = Orchestrator(config=PlatformConfig(), notifier=notifier, clock=clock)
        effect = orch.queue_effect(
            EffectKind.NOTIFY_ORGANIZER, {"message": "weekly digest"}, due_at=clock.now
        )
        orch.run_due_effects(clock.now)
        clock.advance(seconds=3600)
        orch.run_due_effects(clock.now)
        clock.advance(seconds=7200)
        orch.run_due_effects(clock.now)
        assert effect.status is EffectStatus.DONE
        assert effect.attempts == 3
        assert len(notifier.inner.sent) == 1

    def test_exactly_once_even_if_effect_reruns(self):
        # Recovery from an old snapshot can resurrect an already-executed
        # effect; the idempotency key absorbs the duplicate send.
        orch, clock = new_orchestrator()
        effect = orch.queue_effect(
            EffectKind.NOTIFY_ORGANIZER, {"message": "come see"}, due_at=clock.now
        )
        orch.run_due_effects(clock.now)
        effect.status = EffectStatus.PENDING
        orch.run_due_effects(clock.now)
        assert effect.attempts == 2
        assert len(orch.notifier.sent) == 1

    def test_overdue_reminders_go_out_once_per_annotator(self):
        orch, clock = new_orchestrator()
        for a in ("ann-a", "ann-b", "ann-c"):
            activate(orch, a)
        for i in range(1, 3):
            qualify_case(orch, f"case-{i:04d}")
        orch.run_tick(now=clock.now, seed=3)
        clock.advance(days=15)
        orch.run_tick(now=clock.now, seed=4)
        reminders = [e for e in orch.effects if e.kind is EffectKind.REMINDER]
        assert {e.payload["annotator_id"] for e in reminders} == {
            "ann-a",
            "ann-b",
            "ann-c",
        }
        orch.run_due_effects(clock.now)
        targets = [target for _, target, _ in orch.notifier.sent]
        assert sorted(targets) == ["ann-a", "ann-b", "ann-c"]
        for _, _, message in orch.notifier.sent:
            assert "overdue" in message
            assert "clip-case-" in message

    def test_tick_due_effect_keeps_the_cadence(self):
        orch, clock = new_orchestrator()
        for a in ("ann-a", "ann-b", "ann-c"):
            activate(orch, a)
        qualify_case(orch, "case-0001")
        orch.run_tick(now=clock.now, seed=1)
        due = [e for e in orch.effects if e.kind is EffectKind.TICK_DUE]
        assert len(due) == 1
        assert due[0].due_at == clock.now + timedelta(days=14)

        clock.advance(days=14)
        orch.run_due_effects(clock.now)
        ticks = [e for e in orch.log if e.payload["kind"] == "TICK_RUN"]
        assert [e.payload["tick_id"] for e in ticks] == [0, 1]
        again = [e for e in orch.effects if e.kind is EffectKind.TICK_DUE]
        assert len(again) == 2
        assert again[1].due_at == clock.now + timedelta(days=14)


class TestQueries:
    def test_funnel_counts_registered_annotators(self):
        orch, _ = new_orchestrator()
        activate(orch, "ann-a")
        orch.register_annotator(Annotator("ann-b"))
        report = orch.funnel()
        assert report.contacted == 2
        assert report.qualified == 1
        assert report.current_states == {"ACTIVE": 1, "CONTACTED": 1}

    def test_clip_records_carry_case_context(self):
        orch, _, _ = run_small_campaign()
        records = orch.clip_records()
        assert sorted(r.clip_id for r in records) == sorted(orch.state.fused)
        for record in records:
            case = orch.state.videos[record.case_id]
            assert record.provenance == case.provenance
            assert record.split == case.split
            assert record.video_level == orch.state.fused[record.clip_id].video_level

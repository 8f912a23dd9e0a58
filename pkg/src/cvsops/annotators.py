"""Annotator recruitment: competency exam grading and the funnel report."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping

from .domain import (
    EXAM_PASS_THRESHOLD,
    Annotator,
    AnnotatorState,
)


class IncompleteAnswers(Exception):
    """An exam submission is missing answers for one or more items."""


@dataclass(frozen=True)
class ExamItem:
    """One exam question: a reference clip frame and its keyed label triple."""

    item_id: str
    key: tuple[int, int, int]


@dataclass(frozen=True)
class CompetencyExam:
    exam_id: str
    items: tuple[ExamItem, ...]
    pass_threshold: float = EXAM_PASS_THRESHOLD

    def __post_init__(self) -> None:
        if self.pass_threshold != EXAM_PASS_THRESHOLD:
            raise ValueError(f"pass threshold is fixed at {EXAM_PASS_THRESHOLD}")
        if not self.items:
            raise ValueError("an exam needs at least one item")


@dataclass(frozen=True)
class ExamResult:
    score: float
    passed: bool


def grade_exam(
    answers: Mapping[str, tuple[int, int, int]], exam: CompetencyExam
) -> ExamResult:
    """Score an exam submission.

    The score is the fraction of label cells (three per item) matching the
    key. Every item must be answered; extra answers are ignored.
    """
    missing = [item.item_id for item in exam.items if item.item_id not in answers]
    if missing:
        raise IncompleteAnswers(f"missing answers for items: {', '.join(missing)}")
    total = 3 * len(exam.items)
    correct = 0
    for item in exam.items:
        given = answers[item.item_id]
        correct += sum(1 for k in range(3) if given[k] == item.key[k])
    score = correct / total
    return ExamResult(score=score, passed=score >= exam.pass_threshold)


@dataclass(frozen=True)
class FunnelReport:
    """Recruitment funnel snapshot.

    Stage counts are "ever reached" counts over the annotator's state history,
    so someone who passed the exam and later dropped still counts in
    ``passed``. ``dropped`` and the ``current_states`` partition reflect the
    present state only.
    """

    contacted: int
    eligible: int
    exam_taken: int
    passed: int
    qualified: int
    dropped: int
    current_states: dict[str, int]

    def to_dict(self) -> dict[str, Any]:
        return {
            "contacted": self.contacted,
            "eligible": self.eligible,
            "exam_taken": self.exam_taken,
            "passed": self.passed,
            "qualified": self.qualified,
            "dropped": self.dropped,
            "current_states": dict(self.current_states),
        }

    def as_text(self) -> str:
        rows = [
            ("contacted", self.contacted),
            ("eligible", self.eligible),
            ("exam taken", self.exam_taken),
            ("exam passed", self.passed),
            ("qualified (activated)", self.qualified),
            ("dropped", self.dropped),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name.ljust(width)}  {count:>5d}" for name, count in rows)


def funnel_report(pool: Iterable[Annotator]) -> FunnelReport:
    """Summarize a recruitment pool into funnel stage counts."""
    annotators = list(pool)
    current: dict[str, int] = {}
    for a in annotators:
        current[a.state.value] = current.get(a.state.value, 0) + 1
    return FunnelReport(
        contacted=len(annotators),
        eligible=sum(1 for a in annotators if a.ever_reached(AnnotatorState.ELIGIBLE)),
        exam_taken=sum(1 for a in annotators if a.ever_reached(AnnotatorState.EXAM_TAKEN)),
        passed=sum(1 for a in annotators if a.ever_reached(AnnotatorState.QUALIFIED)),
        qualified=sum(1 for a in annotators if a.ever_reached(AnnotatorState.ACTIVE)),
        dropped=sum(1 for a in annotators if a.state is AnnotatorState.DROPPED),
        current_states=dict(sorted(current.items())),
    )

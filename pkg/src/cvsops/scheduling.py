"""Assignment scheduling: who rates which clip, twenty at a time.

Every clip must be rated by exactly three distinct annotators, an annotator
never sees the same clip twice (not even after a revocation), and each tick
hands every active annotator at most one fresh bucket of twenty clips. Within
a tick the scheduler is deterministic in (coverage state, annotator set,
seed): annotators take turns picking one clip at a time, each turn choosing
the least-covered clip they are still allowed to rate, with a seeded shuffle
breaking ties. The turn order rotates so no annotator can monopolize the
scarce, nearly-complete clips.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Any, Iterable, Mapping, Sequence

from .domain import ANNOTATED_FRAME_INDICES, Assessment, QualifiedClip

BUCKET_SIZE = 20
REQUIRED_COVERAGE = 3
DEFAULT_CADENCE = timedelta(days=14)


class UnknownAssignment(Exception):
    """An assessment arrived for a pair the scheduler never issued (or the
    assignment was revoked)."""


class DuplicateAssessment(Exception):
    """A second assessment arrived for an already-completed pair."""


@dataclass(frozen=True)
class Assignment:
    annotator_id: str
    clip_id: str
    tick_id: int
    issued_at: datetime
    due_at: datetime

    def to_dict(self) -> dict[str, Any]:
        return {
            "annotator_id": self.annotator_id,
            "clip_id": self.clip_id,
            "tick_id": self.tick_id,
            "issued_at": self.issued_at.isoformat(),
            "due_at": self.due_at.isoformat(),
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "Assignment":
        return Assignment(
            annotator_id=d["annotator_id"],
            clip_id=d["clip_id"],
            tick_id=int(d["tick_id"]),
            issued_at=datetime.fromisoformat(d["issued_at"]),
            due_at=datetime.fromisoformat(d["due_at"]),
        )


@dataclass(frozen=True)
class AssignmentBatch:
    tick_id: int
    issued_at: datetime
    assignments: tuple[Assignment, ...]

    def by_annotator(self) -> dict[str, list[Assignment]]:
        out: dict[str, list[Assignment]] = {}
        for a in self.assignments:
            out.setdefault(a.annotator_id, []).append(a)
        return out


@dataclass
class _ClipCoverage:
    completed: set[str] = field(default_factory=set)
    outstanding: dict[str, Assignment] = field(default_factory=dict)

    @property
    def load(self) -> int:
        return len(self.completed) + len(self.outstanding)


class CoverageState:
    """Mutable book of record for clip coverage and burned pairs."""

    def __init__(self) -> None:
        self.clips: dict[str, _ClipCoverage] = {}
        self.burned: set[tuple[str, str]] = set()
        self.next_tick_id: int = 0

    def register_clip(self, clip_id: str) -> None:
        if clip_id not in self.clips:
            self.clips[clip_id] = _ClipCoverage()

    def load_of(self, clip_id: str) -> int:
        return self.clips[clip_id].load

    def completed_count(self, clip_id: str) -> int:
        return len(self.clips[clip_id].completed)

    def fully_annotated(self, required: int = REQUIRED_COVERAGE) -> list[str]:
        return sorted(
            cid for cid, cc in self.clips.items() if len(cc.completed) >= required
        )

    def outstanding_assignments(self) -> list[Assignment]:
        out = []
        for cid in sorted(self.clips):
            cc = self.clips[cid]
            out.extend(cc.outstanding[a] for a in sorted(cc.outstanding))
        return out

    def coverage_histogram(self, required: int = REQUIRED_COVERAGE) -> dict[int, int]:
        hist = {k: 0 for k in range(required + 1)}
        for cc in self.clips.values():
            hist[min(len(cc.completed), required)] += 1
        return hist

    def to_dict(self) -> dict[str, Any]:
        return {
            "clips": {
                cid: {
                    "completed": sorted(cc.completed),
                    "outstanding": {
                        a: cc.outstanding[a].to_dict() for a in sorted(cc.outstanding)
                    },
                }
                for cid, cc in sorted(self.clips.items())
            },
            "burned": [list(p) for p in sorted(self.burned)],
            "next_tick_id": self.next_tick_id,
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "CoverageState":
        state = CoverageState()
        for cid, c in d.get("clips", {}).items():
            cc = _ClipCoverage(
                completed=set(c.get("completed", ())),
                outstanding={
                    a: Assignment.from_dict(v)
                    for a, v in c.get("outstanding", {}).items()
                },
            )
            state.clips[cid] = cc
        state.burned = {tuple(p) for p in d.get("burned", ())}
        state.next_tick_id = int(d.get("next_tick_id", 0))
        return state


def run_tick(
    coverage: CoverageState,
    active_annotators: Sequence[str],
    now: datetime,
    seed: int,
    *,
    bucket_size: int = BUCKET_SIZE,
    required_coverage: int = REQUIRED_COVERAGE,
    cadence: timedelta = DEFAULT_CADENCE,
) -> AssignmentBatch:
    """Issue one tick's worth of assignments and record them in ``coverage``.

    Annotators rotate turns, one pick each; a pick is the least-covered clip
    (completed plus outstanding) under the required coverage that the picker
    has never been paired with, ties broken by a seed-shuffled clip order.
    An annotator with no legal pick is skipped; the rotation ends when nobody
    can pick or every bucket is full. A takeover pass then repairs the cases
    where the rotation stranded a dose: an annotator with spare quota absorbs
    one of a colleague's picks from this tick, freeing the colleague for a
    clip the first one was already paired with. Chained takeovers make the
    tick's placement a maximum matching, which the coverage progress bound
    relies on.
    """
    rng = random.Random(seed)
    tick_id = coverage.next_tick_id
    coverage.next_tick_id += 1

    clip_ids = sorted(coverage.clips)
    shuffled = clip_ids[:]
    rng.shuffle(shuffled)
    priority = {cid: i for i, cid in enumerate(shuffled)}

    annotators = sorted(set(active_annotators))
    rng.shuffle(annotators)

    quota = {a: bucket_size for a in annotators}
    due_at = now + cadence
    issued: list[Assignment] = []

    progressed = True
    while progressed:
        progressed = False
        for a in annotators:
            if quota[a] <= 0:
                continue
            best: tuple[int, int] | None = None
            best_cid: str | None = None
            for cid in clip_ids:
                cc = coverage.clips[cid]
                load = cc.load
                if load >= required_coverage or (a, cid) in coverage.burned:
                    continue
                key = (load, priority[cid])
                if best is None or key < best:
                    best = key
                    best_cid = cid
            if best_cid is None:
                continue
            assignment = Assignment(
                annotator_id=a,
                clip_id=best_cid,
                tick_id=tick_id,
                issued_at=now,
                due_at=due_at,
            )
            coverage.clips[best_cid].outstanding[a] = assignment
            coverage.burned.add((a, best_cid))
            quota[a] -= 1
            issued.append(assignment)
            progressed = True

    picks: dict[str, list[Assignment]] = {a: [] for a in annotators}
    for assignment in issued:
        picks[assignment.annotator_id].append(assignment)

    def _move(moved: Assignment, u: str, v: str) -> None:
        # Hand one of u's picks from this tick to v. The pair (u, clip) never
        # left this function, so it is unburned again rather than kept.
        replacement = Assignment(
            annotator_id=v,
            clip_id=moved.clip_id,
            tick_id=tick_id,
            issued_at=now,
            due_at=due_at,
        )
        cc = coverage.clips[moved.clip_id]
        del cc.outstanding[u]
        cc.outstanding[v] = replacement
        coverage.burned.discard((u, moved.clip_id))
        coverage.burned.add((v, moved.clip_id))
        quota[u] += 1
        quota[v] -= 1
        picks[u].remove(moved)
        picks[v].append(replacement)
        issued[issued.index(moved)] = replacement

    def _free_slot_for(targets: set[str]) -> str | None:
        # Breadth-first over "v can absorb one of u's picks" edges, rooted at
        # the annotators with spare quota; reaching a target frees a slot for
        # it. Executing the chain root-first keeps every quota non-negative.
        parent: dict[str, tuple[str, Assignment]] = {}
        frontier = [a for a in annotators if quota[a] > 0]
        seen = set(frontier)
        goal: str | None = None
        while frontier and goal is None:
            nxt: list[str] = []
            for v in frontier:
                for u in annotators:
                    if u in seen:
                        continue
                    pick = next(
                        (p for p in picks[u] if (v, p.clip_id) not in coverage.burned),
                        None,
                    )
                    if pick is None:
                        continue
                    parent[u] = (v, pick)
                    seen.add(u)
                    nxt.append(u)
                    if u in targets:
                        goal = u
                        break
                if goal is not None:
                    break
            frontier = nxt
        if goal is None:
            return None
        chain: list[tuple[str, str, Assignment]] = []
        u = goal
        while u in parent:
            v, moved = parent[u]
            chain.append((u, v, moved))
            u = v
        for u, v, moved in reversed(chain):
            _move(moved, u, v)
        return goal

    def _place_dose(cid: str) -> bool:
        eligible = [a for a in annotators if (a, cid) not in coverage.burned]
        if not eligible:
            return False
        a = next((x for x in eligible if quota[x] > 0), None)
        if a is None:
            a = _free_slot_for(set(eligible))
        if a is None:
            return False
        assignment = Assignment(
            annotator_id=a,
            clip_id=cid,
            tick_id=tick_id,
            issued_at=now,
            due_at=due_at,
        )
        coverage.clips[cid].outstanding[a] = assignment
        coverage.burned.add((a, cid))
        quota[a] -= 1
        issued.append(assignment)
        picks[a].append(assignment)
        return True

    while any(q > 0 for q in quota.values()):
        starving = sorted(
            (cid for cid in clip_ids if coverage.clips[cid].load < required_coverage),
            key=lambda cid: (coverage.clips[cid].load, priority[cid]),
        )
        if not any(_place_dose(cid) for cid in starving):
            break

    return AssignmentBatch(tick_id=tick_id, issued_at=now, assignments=tuple(issued))


def accept_assessment(
    coverage: CoverageState,
    assessment: Assessment,
    required_coverage: int = REQUIRED_COVERAGE,
) -> bool:
    """Record a completed assessment against its outstanding assignment.

    Returns True when this assessment completes the clip's required coverage.
    Raises ``DuplicateAssessment`` when the pair already completed and
    ``UnknownAssignment`` when no outstanding assignment exists for the pair.
    """
    cc = coverage.clips.get(assessment.clip_id)
    if cc is None:
        raise UnknownAssignment(f"{assessment.annotator_id}/{assessment.clip_id}")
    if assessment.annotator_id in cc.completed:
        raise DuplicateAssessment(f"{assessment.annotator_id}/{assessment.clip_id}")
    if assessment.annotator_id not in cc.outstanding:
        raise UnknownAssignment(f"{assessment.annotator_id}/{assessment.clip_id}")
    del cc.outstanding[assessment.annotator_id]
    cc.completed.add(assessment.annotator_id)
    return len(cc.completed) == required_coverage


def revoke_stale_assignments(
    coverage: CoverageState, dropped_annotators: Iterable[str], current_tick_id: int
) -> list[Assignment]:
    """Pull back outstanding assignments of dropped annotators issued before
    the current tick. Coverage load drops accordingly, but the pair stays
    burned: the clip may go to someone else, never back to the same rater."""
    dropped = set(dropped_annotators)
    revoked: list[Assignment] = []
    for cid in sorted(coverage.clips):
        cc = coverage.clips[cid]
        for a in sorted(set(cc.outstanding) & dropped):
            assignment = cc.outstanding[a]
            if assignment.tick_id < current_tick_id:
                del cc.outstanding[a]
                revoked.append(assignment)
    return revoked


def list_overdue(coverage: CoverageState, now: datetime) -> list[Assignment]:
    return [a for a in coverage.outstanding_assignments() if a.due_at < now]


@dataclass(frozen=True)
class AnnotatorView:
    """What a rater is allowed to see about a clip: no provenance, no case
    linkage, just the media window and which frames to label."""

    clip_id: str
    media_uri: str
    frame_indices: tuple[int, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "clip_id": self.clip_id,
            "media_uri": self.media_uri,
            "frame_indices": list(self.frame_indices),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def blind_payload(clip: QualifiedClip) -> AnnotatorView:
    """Strip a qualified clip down to the rater-visible fields."""
    return AnnotatorView(
        clip_id=clip.clip_id,
        media_uri=clip.media_uri,
        frame_indices=tuple(ANNOTATED_FRAME_INDICES),
    )

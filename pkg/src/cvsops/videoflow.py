"""Video intake, eligibility screening, dual-rater adjudication, and clip
extraction.

Screening is adjudicated by a chain of verdicts: raters submit one at a time
and the chain closes as soon as the last two consecutive verdicts agree on
every contract field. Most cases therefore need exactly two raters; a
disagreement pulls in a third, and so on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .domain import (
    CLIP_DURATION_S,
    TIMESTAMP_TOLERANCE_S,
    CaseProvenance,
    ExclusionReason,
    PreAnnotation,
    QualifiedClip,
    SurgicalApproach,
    VideoCase,
    VideoState,
)


class ChainClosed(Exception):
    """A verdict arrived after the chain already reached concordance."""


class DuplicateRater(Exception):
    """A rater tried to submit a second verdict on the same case."""


class NotQualified(Exception):
    """Clip extraction was requested for a case that is not ready for it."""


class WindowUnderflow(Exception):
    """The clipping event happens before one full window has elapsed."""


class ChainStatus(str, Enum):
    NEEDS_RATER = "NEEDS_RATER"
    CONCORDANT = "CONCORDANT"


def _classify(
    *,
    is_cholecystectomy: bool,
    bailout: bool,
    clipping_timestamp: float | None,
    window_obscured: bool,
    case_duration_s: float,
) -> ExclusionReason | None:
    """The screening rules, checked in a fixed order so a case with several
    problems always gets the same primary reason: wrong procedure, then
    bailout, then the state of the clipping timestamp. A timestamp is
    unusable when it is missing or falls outside the recording; a usable one
    still fails when fewer than one full window precedes it or when the
    dissection window was obscured."""
    if not is_cholecystectomy:
        return ExclusionReason.NOT_CHOLECYSTECTOMY
    if bailout:
        return ExclusionReason.BAILOUT
    if clipping_timestamp is None or clipping_timestamp > case_duration_s:
        return ExclusionReason.INCOMPLETE_NO_CLIPPING
    if clipping_timestamp < CLIP_DURATION_S or window_obscured:
        return ExclusionReason.NO_CONTINUOUS_90S
    return None


def check_eligibility(
    verdict: PreAnnotation, case_duration_s: float
) -> ExclusionReason | None:
    """Classify a screening record; ``None`` means the case is eligible."""
    return _classify(
        is_cholecystectomy=verdict.is_cholecystectomy,
        bailout=verdict.bailout,
        clipping_timestamp=verdict.clipping_timestamp,
        window_obscured=verdict.window_obscured,
        case_duration_s=case_duration_s,
    )


def screen(
    rater_id: str,
    case_duration_s: float,
    *,
    clipping_timestamp: float | None,
    used_ioc: bool,
    used_icg: bool,
    approach: SurgicalApproach,
    is_cholecystectomy: bool = True,
    bailout: bool = False,
    window_obscured: bool = False,
    needs_blur: bool = False,
) -> PreAnnotation:
    """Build a verdict record from raw screening observations.

    Runs the eligibility rules and stamps the result, so the returned record
    always satisfies the eligible/exclusion_reason consistency invariant.
    """
    reason = _classify(
        is_cholecystectomy=is_cholecystectomy,
        bailout=bailout,
        clipping_timestamp=clipping_timestamp,
        window_obscured=window_obscured,
        case_duration_s=case_duration_s,
    )
    return PreAnnotation(
        rater_id=rater_id,
        eligible=reason is None,
        exclusion_reason=reason,
        clipping_timestamp=clipping_timestamp,
        used_ioc=used_ioc,
        used_icg=used_icg,
        approach=approach,
        is_cholecystectomy=is_cholecystectomy,
        bailout=bailout,
        window_obscured=window_obscured,
        needs_blur=needs_blur,
    )


def verdicts_concordant(a: PreAnnotation, b: PreAnnotation) -> bool:
    """Two verdicts agree when every contract field matches; the clipping
    timestamp tolerates small disagreement (both present and within 2.0 s,
    or both absent)."""
    if a.eligible != b.eligible or a.exclusion_reason != b.exclusion_reason:
        return False
    if a.used_ioc != b.used_ioc or a.used_icg != b.used_icg:
        return False
    if a.approach != b.approach:
        return False
    if (a.clipping_timestamp is None) != (b.clipping_timestamp is None):
        return False
    if a.clipping_timestamp is not None and b.clipping_timestamp is not None:
        if abs(a.clipping_timestamp - b.clipping_timestamp) > TIMESTAMP_TOLERANCE_S:
            return False
    return True


@dataclass(frozen=True)
class AdjudicationChain:
    """Ordered verdicts for one case plus the stopping-rule status."""

    case_id: str
    entries: tuple[PreAnnotation, ...] = ()

    @property
    def status(self) -> ChainStatus:
        if len(self.entries) >= 2 and verdicts_concordant(self.entries[-2], self.entries[-1]):
            return ChainStatus.CONCORDANT
        return ChainStatus.NEEDS_RATER

    @property
    def final_metadata(self) -> PreAnnotation:
        if self.status is not ChainStatus.CONCORDANT:
            raise ValueError("chain has not reached concordance")
        return self.entries[-1]


def submit_preannotation(chain: AdjudicationChain, verdict: PreAnnotation) -> AdjudicationChain:
    """Append one verdict to an open chain.

    Raises ``ChainClosed`` once concordance has been reached and
    ``DuplicateRater`` if the rater already contributed to this case.
    """
    if chain.status is ChainStatus.CONCORDANT:
        raise ChainClosed(chain.case_id)
    if any(e.rater_id == verdict.rater_id for e in chain.entries):
        raise DuplicateRater(verdict.rater_id)
    return AdjudicationChain(case_id=chain.case_id, entries=chain.entries + (verdict,))


def chain_status(entries: Iterable[PreAnnotation]) -> ChainStatus:
    """Status of a raw verdict sequence (used when the chain lives inside a
    ``VideoCase`` rather than an ``AdjudicationChain`` value)."""
    entries = tuple(entries)
    return AdjudicationChain(case_id="", entries=entries).status


def extract_clip(case: VideoCase) -> QualifiedClip:
    """Cut the rating window: the 90 s that end at the clipping event.

    The case must be in the QUALIFIED state with concordant final metadata.
    """
    if case.state is not VideoState.QUALIFIED or case.final_metadata is None:
        raise NotQualified(case.case_id)
    t = case.final_metadata.clipping_timestamp
    if t is None or t < CLIP_DURATION_S:
        raise WindowUnderflow(case.case_id)
    return QualifiedClip(
        clip_id=f"clip-{case.case_id}",
        case_id=case.case_id,
        media_uri=f"{case.media_uri}#t={t - CLIP_DURATION_S:.0f},{t:.0f}",
        window_start_s=t - CLIP_DURATION_S,
        window_end_s=t,
    )


# ---------------------------------------------------------------------------
# Intake manifest and screening log files
# ---------------------------------------------------------------------------


def read_intake_manifest(path: str | Path) -> list[VideoCase]:
    """Read a JSON-lines intake manifest into RECEIVED cases.

    Each line carries case_id, media_uri, duration_s, and a provenance
    object; unknown provenance fields are null.
    """
    cases = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            cases.append(
                VideoCase(
                    case_id=d["case_id"],
                    media_uri=d["media_uri"],
                    duration_s=float(d["duration_s"]),
                    provenance=CaseProvenance.from_dict(d["provenance"]),
                    split=d.get("split"),
                )
            )
    return cases


def write_intake_manifest(cases: Iterable[VideoCase], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(
                json.dumps(
                    {
                        "case_id": case.case_id,
                        "media_uri": case.media_uri,
                        "duration_s": case.duration_s,
                        "provenance": case.provenance.to_dict(),
                        "split": case.split,
                    },
                    sort_keys=False,
                )
                + "\n"
            )


def write_screening_log(cases: Iterable[VideoCase], path: str | Path) -> None:
    """Append-only JSONL audit of every verdict on every case."""
    with open(path, "w", encoding="utf-8") as fh:
        for case in cases:
            for entry in case.preannotation_chain:
                fh.write(
                    json.dumps({"case_id": case.case_id, **entry.to_dict()}, sort_keys=False)
                    + "\n"
                )


def iter_screening_log(path: str | Path) -> Iterator[tuple[str, PreAnnotation]]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            yield d["case_id"], PreAnnotation.from_dict(d)

"""Fusing three independent ratings of a clip into reference labels.

Every annotated frame of a clip carries one binary label per criterion from
each of its three raters. Fusion produces, per (frame, criterion) cell:

* a hard label: the majority vote (mode) of the three raters;
* a soft label: a confidence-weighted average that backs off towards 0.5
  when raters are unsure,

      y = (1/3) * sum_i (0.5 + (l_i - 0.5) * c_i)

  where l_i is rater i's binary label and c_i the rater's self-reported
  clip-level confidence. Unanimous confident raters push y to 0 or 1; zero
  confidence collapses to 0.5 regardless of the labels;
* an agreement class: FULL when all three labels match, PARTIAL otherwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .domain import (
    ANNOTATED_FRAME_INDICES,
    CRITERIA,
    AgreementLevel,
    Assessment,
    CaseProvenance,
    LabelTriple,
    RATERS_PER_CLIP,
)
from .util import round_half_up


class FusionInputError(ValueError):
    """The assessments handed to fusion do not form a valid rating triple."""


def fuse_mode(triple: LabelTriple) -> int:
    """Majority vote of the three binary labels."""
    return 1 if sum(triple.labels) >= 2 else 0


def fuse_soft(triple: LabelTriple) -> float:
    """Confidence-weighted soft label in [0, 1] (see module docstring)."""
    return sum(
        0.5 + (l - 0.5) * c for l, c in zip(triple.labels, triple.confidences)
    ) / len(triple.labels)


def agreement_class(triple: LabelTriple) -> AgreementLevel:
    """FULL when all three raters agree, PARTIAL otherwise."""
    return AgreementLevel.FULL if len(set(triple.labels)) == 1 else AgreementLevel.PARTIAL


@dataclass(frozen=True)
class FusedClip:
    """Reference labels for one clip: per annotated frame, a mode / soft /
    agreement value per criterion, plus clip-level summaries."""

    clip_id: str
    mode: tuple[tuple[int, int, int], ...]
    soft: tuple[tuple[float, float, float], ...]
    agreement: tuple[tuple[AgreementLevel, AgreementLevel, AgreementLevel], ...]
    video_level: tuple[int, int, int]
    mean_confidence: float

    def __post_init__(self) -> None:
        n = len(ANNOTATED_FRAME_INDICES)
        if not (len(self.mode) == len(self.soft) == len(self.agreement) == n):
            raise FusionInputError(f"fused clip must cover {n} annotated frames")

    def to_dict(self) -> dict[str, Any]:
        return {
            "clip_id": self.clip_id,
            "mode": [list(row) for row in self.mode],
            "soft": [list(row) for row in self.soft],
            "agreement": [[a.value for a in row] for row in self.agreement],
            "video_level": list(self.video_level),
            "mean_confidence": self.mean_confidence,
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "FusedClip":
        return FusedClip(
            clip_id=d["clip_id"],
            mode=tuple(tuple(int(v) for v in row) for row in d["mode"]),
            soft=tuple(tuple(float(v) for v in row) for row in d["soft"]),
            agreement=tuple(
                tuple(AgreementLevel(a) for a in row) for row in d["agreement"]
            ),
            video_level=tuple(int(v) for v in d["video_level"]),
            mean_confidence=float(d["mean_confidence"]),
        )


def fuse_assessments(assessments: Sequence[Assessment]) -> FusedClip:
    """Fuse exactly three assessments of the same clip by distinct raters."""
    if len(assessments) != RATERS_PER_CLIP:
        raise FusionInputError(
            f"need exactly {RATERS_PER_CLIP} assessments, got {len(assessments)}"
        )
    clip_ids = {a.clip_id for a in assessments}
    if len(clip_ids) != 1:
        raise FusionInputError(f"assessments span several clips: {sorted(clip_ids)}")
    if len({a.annotator_id for a in assessments}) != RATERS_PER_CLIP:
        raise FusionInputError("assessments must come from distinct raters")

    # Deterministic rater order so fused output never depends on arrival order.
    raters = sorted(assessments, key=lambda a: a.annotator_id)
    confidences = tuple(a.confidence for a in raters)

    mode_rows: list[tuple[int, int, int]] = []
    soft_rows: list[tuple[float, float, float]] = []
    agree_rows: list[tuple[AgreementLevel, AgreementLevel, AgreementLevel]] = []
    for f in range(len(ANNOTATED_FRAME_INDICES)):
        cells = [
            LabelTriple(
                labels=tuple(r.frame_labels[f][k] for r in raters),
                confidences=confidences,
            )
            for k in range(3)
        ]
        mode_rows.append(tuple(fuse_mode(c) for c in cells))
        soft_rows.append(tuple(fuse_soft(c) for c in cells))
        agree_rows.append(tuple(agreement_class(c) for c in cells))

    video_cells = [
        LabelTriple(
            labels=tuple(r.video_level[k] for r in raters), confidences=confidences
        )
        for k in range(3)
    ]
    return FusedClip(
        clip_id=raters[0].clip_id,
        mode=tuple(mode_rows),
        soft=tuple(soft_rows),
        agreement=tuple(agree_rows),
        video_level=tuple(fuse_mode(c) for c in video_cells),
        mean_confidence=sum(confidences) / len(confidences),
    )


def expert_bound_predict(
    assessments: Sequence[Assessment], bound: str = "upper"
) -> list[tuple[float, float, float]]:
    """Reference predictors bracketing achievable agreement with fused labels.

    ``upper``: predict the mode everywhere (what a rater who always sides
    with the majority would produce). ``lower``: predict the mode only where
    all three raters agreed, and the minority label on contested cells (a
    rater who is always outvoted on disagreements).
    """
    if bound not in ("upper", "lower"):
        raise ValueError("bound must be 'upper' or 'lower'")
    fused = fuse_assessments(assessments)
    rows: list[tuple[float, float, float]] = []
    for f in range(len(ANNOTATED_FRAME_INDICES)):
        row = []
        for k in range(3):
            mode = fused.mode[f][k]
            if bound == "upper" or fused.agreement[f][k] is AgreementLevel.FULL:
                row.append(float(mode))
            else:
                row.append(float(1 - mode))
        rows.append(tuple(row))
    return rows


# ---------------------------------------------------------------------------
# Classification report (frame-level agreement with the fused reference)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassificationReport:
    """Per-criterion accuracy and macro-F1 against fused hard labels.

    ``macro_f1`` per criterion is the unweighted mean of the F1 of the
    negative class and the F1 of the positive class; ``overall_macro_f1``
    averages the three criteria. ``subset_accuracy`` counts a frame correct
    only when all three criteria match.
    """

    accuracy: tuple[float, float, float]
    macro_f1: tuple[float, float, float]
    overall_macro_f1: float
    subset_accuracy: float
    support: int

    def to_percent_dict(self) -> dict[str, Any]:
        crit = [c.value for c in CRITERIA]
        return {
            "macro_f1": {
                "overall": round_half_up(100 * self.overall_macro_f1, 2),
                **{crit[k]: round_half_up(100 * self.macro_f1[k], 2) for k in range(3)},
            },
            "accuracy": {
                "overall": round_half_up(100 * self.subset_accuracy, 2),
                **{crit[k]: round_half_up(100 * self.accuracy[k], 2) for k in range(3)},
            },
            "support": self.support,
        }


def _binary_f1(truth: Sequence[int], pred: Sequence[int], positive: int) -> float:
    tp = sum(1 for t, p in zip(truth, pred) if t == positive and p == positive)
    fp = sum(1 for t, p in zip(truth, pred) if t != positive and p == positive)
    fn = sum(1 for t, p in zip(truth, pred) if t == positive and p != positive)
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def classification_report(
    predicted: Sequence[tuple[int, int, int]],
    truth: Sequence[tuple[int, int, int]],
) -> ClassificationReport:
    """Score hard predictions against fused hard labels, frame by frame."""
    if len(predicted) != len(truth):
        raise ValueError("predicted and truth must align")
    if not truth:
        raise ValueError("empty report")
    accuracy = []
    macro = []
    for k in range(3):
        t = [row[k] for row in truth]
        p = [row[k] for row in predicted]
        accuracy.append(sum(1 for a, b in zip(t, p) if a == b) / len(t))
        macro.append((_binary_f1(t, p, 0) + _binary_f1(t, p, 1)) / 2)
    subset = sum(1 for t, p in zip(truth, predicted) if tuple(t) == tuple(p)) / len(truth)
    return ClassificationReport(
        accuracy=tuple(accuracy),
        macro_f1=tuple(macro),
        overall_macro_f1=sum(macro) / 3,
        subset_accuracy=subset,
        support=len(truth),
    )


# ---------------------------------------------------------------------------
# Clip records and dataset statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClipRecord:
    """Evaluation-facing metadata for one fused clip: provenance, split, the
    fused video-level labels, and the raters' mean confidence."""

    clip_id: str
    case_id: str
    split: str | None
    provenance: CaseProvenance
    mean_confidence: float
    rater_confidences: tuple[float, float, float]
    video_level: tuple[int, int, int]
    video_full_agreement: tuple[bool, bool, bool]

    def to_dict(self) -> dict[str, Any]:
        return {
            "clip_id": self.clip_id,
            "case_id": self.case_id,
            "split": self.split,
            "provenance": self.provenance.to_dict(),
            "mean_confidence": self.mean_confidence,
            "rater_confidences": list(self.rater_confidences),
            "video_level": list(self.video_level),
            "video_full_agreement": list(self.video_full_agreement),
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "ClipRecord":
        return ClipRecord(
            clip_id=d["clip_id"],
            case_id=d["case_id"],
            split=d.get("split"),
            provenance=CaseProvenance.from_dict(d["provenance"]),
            mean_confidence=float(d["mean_confidence"]),
            rater_confidences=tuple(float(c) for c in d["rater_confidences"]),
            video_level=tuple(d["video_level"]),
            video_full_agreement=tuple(bool(v) for v in d["video_full_agreement"]),
        )


def make_clip_record(
    fused: FusedClip,
    *,
    case_id: str,
    split: str | None,
    provenance: CaseProvenance,
    assessments: Sequence[Assessment],
) -> ClipRecord:
    raters = sorted(assessments, key=lambda a: a.annotator_id)
    full = tuple(
        len({r.video_level[k] for r in raters}) == 1 for k in range(3)
    )
    return ClipRecord(
        clip_id=fused.clip_id,
        case_id=case_id,
        split=split,
        provenance=provenance,
        mean_confidence=fused.mean_confidence,
        rater_confidences=tuple(a.confidence for a in raters),
        video_level=fused.video_level,
        video_full_agreement=full,
    )


@dataclass(frozen=True)
class SplitStats:
    split: str
    n_clips: int
    n_countries: int
    n_device_vendors: int
    unknown_device: int
    robotic: int
    used_ioc: int
    used_icg: int
    confidence_mean: float
    confidence_sd: float
    video_level_achieved: tuple[int, int, int]
    video_full_agreement_rate: tuple[float, float, float]
    frame_full_agreement_rate: tuple[float, float, float] | None

    def to_dict(self) -> dict[str, Any]:
        crit = [c.value for c in CRITERIA]
        return {
            "split": self.split,
            "n_clips": self.n_clips,
            "n_countries": self.n_countries,
            "n_device_vendors": self.n_device_vendors,
            "unknown_device": self.unknown_device,
            "robotic": self.robotic,
            "used_ioc": self.used_ioc,
            "used_icg": self.used_icg,
            "confidence_mean": round_half_up(self.confidence_mean, 4),
            "confidence_sd": round_half_up(self.confidence_sd, 4),
            "video_level_achieved": dict(zip(crit, self.video_level_achieved)),
            "video_full_agreement_rate": {
                c: round_half_up(v, 4)
                for c, v in zip(crit, self.video_full_agreement_rate)
            },
            "frame_full_agreement_rate": (
                {c: round_half_up(v, 4) for c, v in zip(crit, self.frame_full_agreement_rate)}
                if self.frame_full_agreement_rate is not None
                else None
            ),
        }


def dataset_stats(
    records: Iterable[ClipRecord],
    fused: Mapping[str, FusedClip] | None = None,
) -> list[SplitStats]:
    """Summarize fused clips per split (clips with ``split=None`` pool under
    "ALL"). Frame-level agreement rates are included when the fused labels
    are supplied alongside the records."""
    by_split: dict[str, list[ClipRecord]] = {}
    for rec in records:
        by_split.setdefault(rec.split or "ALL", []).append(rec)

    out: list[SplitStats] = []
    for split in sorted(by_split):
        rows = by_split[split]
        n = len(rows)
        # Confidence statistics pool the individual rater values, not the
        # per-clip means: each clip contributes three samples.
        confs = [c for r in rows for c in r.rater_confidences]
        mean = sum(confs) / len(confs)
        sd = math.sqrt(sum((c - mean) ** 2 for c in confs) / len(confs))
        countries = {r.provenance.country for r in rows if r.provenance.country}
        vendors = {r.provenance.device_vendor for r in rows if r.provenance.device_vendor}
        frame_rates: tuple[float, float, float] | None = None
        if fused is not None:
            cells = [fused[r.clip_id] for r in rows if r.clip_id in fused]
            if cells:
                totals = [0, 0, 0]
                full = [0, 0, 0]
                for fc in cells:
                    for row in fc.agreement:
                        for k in range(3):
                            totals[k] += 1
                            if row[k] is AgreementLevel.FULL:
                                full[k] += 1
                frame_rates = tuple(full[k] / totals[k] for k in range(3))
        out.append(
            SplitStats(
                split=split,
                n_clips=n,
                n_countries=len(countries),
                n_device_vendors=len(vendors),
                unknown_device=sum(1 for r in rows if r.provenance.device_vendor is None),
                robotic=sum(
                    1 for r in rows if r.provenance.approach.value == "ROBOTIC"
                ),
                used_ioc=sum(1 for r in rows if r.provenance.used_ioc),
                used_icg=sum(1 for r in rows if r.provenance.used_icg),
                confidence_mean=mean,
                confidence_sd=sd,
                video_level_achieved=tuple(
                    sum(r.video_level[k] for r in rows) for k in range(3)
                ),
                video_full_agreement_rate=tuple(
                    sum(1 for r in rows if r.video_full_agreement[k]) / n for k in range(3)
                ),
                frame_full_agreement_rate=frame_rates,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Fused label files (the evaluation input contract)
# ---------------------------------------------------------------------------


def write_fused_labels(clips: Iterable[FusedClip], path: str | Path) -> None:
    """One JSON line per (clip, annotated frame) with mode / soft / agreement
    per criterion."""
    crit = [c.value for c in CRITERIA]
    with open(path, "w", encoding="utf-8") as fh:
        for clip in clips:
            for f, frame_index in enumerate(ANNOTATED_FRAME_INDICES):
                fh.write(
                    json.dumps(
                        {
                            "clip_id": clip.clip_id,
                            "frame_index": frame_index,
                            "mode": dict(zip(crit, clip.mode[f])),
                            "soft": dict(zip(crit, clip.soft[f])),
                            "agreement": {
                                c: a.value for c, a in zip(crit, clip.agreement[f])
                            },
                        },
                        sort_keys=False,
                    )
                    + "\n"
                )


def read_fused_labels(path: str | Path) -> dict[str, FusedClip]:
    """Read fused labels back; video-level and confidence summaries are not
    part of this file, so they are reconstructed conservatively (video level
    from the mode rows, confidence left at 0.0). Use the clip records file for
    the clip-level metadata."""
    crit = [c.value for c in CRITERIA]
    rows: dict[str, dict[int, tuple]] = {}
    for_clip_order: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            cid = d["clip_id"]
            if cid not in rows:
                rows[cid] = {}
                for_clip_order.append(cid)
            rows[cid][int(d["frame_index"])] = (
                tuple(int(d["mode"][c]) for c in crit),
                tuple(float(d["soft"][c]) for c in crit),
                tuple(AgreementLevel(d["agreement"][c]) for c in crit),
            )
    out: dict[str, FusedClip] = {}
    for cid in for_clip_order:
        frame_map = rows[cid]
        missing = [i for i in ANNOTATED_FRAME_INDICES if i not in frame_map]
        if missing:
            raise FusionInputError(f"clip {cid} is missing annotated frames {missing}")
        mode = tuple(frame_map[i][0] for i in ANNOTATED_FRAME_INDICES)
        soft = tuple(frame_map[i][1] for i in ANNOTATED_FRAME_INDICES)
        agreement = tuple(frame_map[i][2] for i in ANNOTATED_FRAME_INDICES)
        video = tuple(1 if any(row[k] for row in mode) else 0 for k in range(3))
        out[cid] = FusedClip(
            clip_id=cid,
            mode=mode,
            soft=soft,
            agreement=agreement,
            video_level=video,
            mean_confidence=0.0,
        )
    return out


def write_clip_records(records: Iterable[ClipRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=False) + "\n")


def read_clip_records(path: str | Path) -> list[ClipRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(ClipRecord.from_dict(json.loads(line)))
    return out

"""Synthetic cohorts and campaigns for exercising the platform end to end.

Nothing here touches real video. The generator fabricates a pool of cases,
a rating workforce, and three assessments per clip whose summary statistics
land on configurable targets:

* video-level achievement rates per criterion (after fusion);
* the rate at which all three raters return the same video-level verdict;
* the mean/SD of self-reported clip confidence, per split;
* provenance marginals (country and device mix, unknown devices, adjunct
  imaging, robotic approach).

The rater model is generative rather than tabular. Each criterion of each
case gets a latent verdict and, when achieved, a latent onset among the
annotated positions. A rater flips the verdict with a small probability and
jitters the onset by a couple of positions, which produces exactly the
disagreement texture the fusion and evaluation code has to cope with:
monotone per-rater label columns, partial agreement concentrated around
onsets, and occasional majority errors.

Because the verdict a rater reports is mediated by the flip noise, hitting a
target achievement rate after three-way majority fusion requires sampling the
latent verdict at a corrected rate; ``corrected_positive_rate`` inverts the
majority-error channel. Likewise the verdict flip probability is derived from
the configured full-agreement rate by inverting P(all three agree).

``run_campaign`` replays a generated pool through a real ``Orchestrator``:
intake, screening, clip extraction, scheduled ticks, assessments, and fusion
effects, advancing a simulated clock one cadence per tick. It raises
``DeadlockDetected`` when un-covered clips remain but no tick can issue work.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from . import videoflow
from .annotators import FunnelReport, funnel_report
from .config import PlatformConfig
from .domain import (
    ANNOTATED_FRAME_INDICES,
    Activated,
    AllAssessmentsIn,
    AnnotationStarted,
    Annotator,
    AnnotatorState,
    Assessment,
    CaseProvenance,
    ClipExtracted,
    ConcordanceReached,
    DroppedOut,
    EligibilityPassed,
    EligibilityRejected,
    ExamGraded,
    ExamSubmitted,
    FusionCompleted,
    PreAnnotationSubmitted,
    ScreeningStarted,
    SurgicalApproach,
    TrainingStarted,
    VideoCase,
    annotator_transition,
    video_transition,
)
from .fusion import ClipRecord, FusedClip, fuse_assessments, make_clip_record
from .orchestrator import MemoryNotifier, NotificationPort, Orchestrator

N_POSITIONS = len(ANNOTATED_FRAME_INDICES)

TRAIN_SPLIT = "train"
TEST_SPLIT = "test"


class InvalidConfig(Exception):
    """A simulation parameter is out of range or inconsistent."""


class DeadlockDetected(Exception):
    """The campaign stalled: clips below required coverage, nothing issuable."""

    def __init__(self, starving_clips: Sequence[str]):
        self.starving_clips = tuple(starving_clips)
        super().__init__(
            f"{len(self.starving_clips)} clips can no longer reach full coverage"
        )


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def _check_rate(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise InvalidConfig(f"{name} must lie in [0, 1], got {value}")


def _check_weights(name: str, weights: tuple[tuple[str, float], ...]) -> None:
    if not weights:
        raise InvalidConfig(f"{name} must not be empty")
    if any(w < 0 for _, w in weights):
        raise InvalidConfig(f"{name} must be non-negative")
    total = sum(w for _, w in weights)
    if abs(total - 1.0) > 1e-9:
        raise InvalidConfig(f"{name} must sum to 1, got {total}")


def _ranked_weights(labels: Sequence[str], skew: float) -> tuple[tuple[str, float], ...]:
    """Power-law weights over labels: the k-th label gets weight ~ 1/k^skew."""
    raw = [(label, 1.0 / (rank + 1) ** skew) for rank, label in enumerate(labels)]
    total = sum(w for _, w in raw)
    return tuple((label, w / total) for label, w in raw)


def _default_country_weights() -> tuple[tuple[str, float], ...]:
    return _ranked_weights([f"country-{i:02d}" for i in range(1, 24)], skew=1.4)


def _default_device_weights() -> tuple[tuple[str, float], ...]:
    return _ranked_weights([f"vendor-{c}" for c in "ABCDEFGH"], skew=1.2)


@dataclass(frozen=True)
class FunnelModel:
    """Stage-transition probabilities for recruitment replay.

    The defaults are the empirical fractions of the recruitment history that
    ``reference_funnel_pool`` reconstructs exactly: 106 contacted, 71 moving
    into training, 67 sitting the exam, 27 passing, 20 activating.
    """

    contacted: int = 106
    p_no_clinical_background: float = 2 / 106
    p_drop_before_training: float = 33 / 106
    p_drop_in_training: float = 4 / 71
    p_pass_exam: float = 27 / 67
    p_activate: float = 20 / 27

    def __post_init__(self) -> None:
        if self.contacted < 1:
            raise InvalidConfig("contacted must be positive")
        for name in (
            "p_no_clinical_background",
            "p_drop_before_training",
            "p_drop_in_training",
            "p_pass_exam",
            "p_activate",
        ):
            _check_rate(name, getattr(self, name))
        if self.p_no_clinical_background + self.p_drop_before_training > 1.0:
            raise InvalidConfig("first-stage exit probabilities exceed 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "contacted": self.contacted,
            "p_no_clinical_background": self.p_no_clinical_background,
            "p_drop_before_training": self.p_drop_before_training,
            "p_drop_in_training": self.p_drop_in_training,
            "p_pass_exam": self.p_pass_exam,
            "p_activate": self.p_activate,
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "FunnelModel":
        return FunnelModel(**{k: d[k] for k in FunnelModel().to_dict() if k in d})


@dataclass(frozen=True)
class AgreementModel:
    """Targets for rater behavior.

    ``video_positive_rate`` is the per-criterion fraction of clips whose
    fused video-level label should come out positive. The
    ``video_full_agreement_rate`` is the fraction of (clip, criterion) cells
    on which all three raters report the same video-level verdict; the
    per-rater verdict flip probability is derived from it.
    ``onset_jitter_weights`` give the distribution of a rater's onset offset
    in annotated positions, centered (so a length-5 tuple spans -2..+2).
    """

    video_positive_rate: tuple[float, float, float] = (0.413, 0.600, 0.395)
    video_full_agreement_rate: float = 0.8575
    onset_jitter_weights: tuple[float, ...] = (0.05, 0.2, 0.5, 0.2, 0.05)

    def __post_init__(self) -> None:
        for i, rate in enumerate(self.video_positive_rate):
            _check_rate(f"video_positive_rate[{i}]", rate)
        if not 0.25 < self.video_full_agreement_rate <= 1.0:
            raise InvalidConfig(
                "video_full_agreement_rate must lie in (0.25, 1]; three "
                "independent raters cannot agree less often than 25% of the time"
            )
        if len(self.onset_jitter_weights) % 2 != 1:
            raise InvalidConfig("onset_jitter_weights needs an odd length")
        if any(w < 0 for w in self.onset_jitter_weights) or sum(
            self.onset_jitter_weights
        ) <= 0:
            raise InvalidConfig("onset_jitter_weights must be non-negative, not all zero")

    @property
    def flip_rate(self) -> float:
        return derive_flip_rate(self.video_full_agreement_rate)

    def to_dict(self) -> dict[str, Any]:
        return {
            "video_positive_rate": list(self.video_positive_rate),
            "video_full_agreement_rate": self.video_full_agreement_rate,
            "onset_jitter_weights": list(self.onset_jitter_weights),
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "AgreementModel":
        kwargs: dict[str, Any] = {}
        if "video_positive_rate" in d:
            kwargs["video_positive_rate"] = tuple(d["video_positive_rate"])
        if "video_full_agreement_rate" in d:
            kwargs["video_full_agreement_rate"] = d["video_full_agreement_rate"]
        if "onset_jitter_weights" in d:
            kwargs["onset_jitter_weights"] = tuple(d["onset_jitter_weights"])
        return AgreementModel(**kwargs)


@dataclass(frozen=True)
class ConfidenceModel:
    """Per-split targets for the post-clamp confidence distribution."""

    mean: float = 0.64
    sd: float = 0.28
    test_mean: float = 0.58
    test_sd: float = 0.27

    def __post_init__(self) -> None:
        for name in ("mean", "test_mean"):
            _check_rate(name, getattr(self, name))
        for name in ("sd", "test_sd"):
            if not 0.0 < getattr(self, name) < 0.5:
                raise InvalidConfig(f"{name} must lie in (0, 0.5) for a [0, 1] value")

    def params(self, split: str | None) -> tuple[float, float]:
        if split == TEST_SPLIT:
            return (self.test_mean, self.test_sd)
        return (self.mean, self.sd)

    def to_dict(self) -> dict[str, Any]:
        return {
            "mean": self.mean,
            "sd": self.sd,
            "test_mean": self.test_mean,
            "test_sd": self.test_sd,
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "ConfidenceModel":
        return ConfidenceModel(**{k: d[k] for k in ConfidenceModel().to_dict() if k in d})


@dataclass(frozen=True)
class ProvenanceModel:
    """Marginals for where cases come from and how they were operated.

    Weights are (label, weight) pairs in draw order. Rates that differ by
    split carry a (train, test) pair; adjunct imaging uses one shared rate.
    """

    country_weights: tuple[tuple[str, float], ...] = field(
        default_factory=_default_country_weights
    )
    device_weights: tuple[tuple[str, float], ...] = field(
        default_factory=_default_device_weights
    )
    unknown_device_rate: tuple[float, float] = (156 / 700, 114 / 300)
    robotic_rate: tuple[float, float] = (47 / 700, 34 / 300)
    ioc_rate: float = 0.06
    icg_rate: float = 0.12

    def __post_init__(self) -> None:
        _check_weights("country_weights", self.country_weights)
        _check_weights("device_weights", self.device_weights)
        for name in ("unknown_device_rate", "robotic_rate"):
            pair = getattr(self, name)
            if len(pair) != 2:
                raise InvalidConfig(f"{name} must be a (train, test) pair")
            for v in pair:
                _check_rate(name, v)
        _check_rate("ioc_rate", self.ioc_rate)
        _check_rate("icg_rate", self.icg_rate)

    def split_rates(self, split: str | None) -> tuple[float, float]:
        """(unknown_device, robotic) rates for a split."""
        idx = 1 if split == TEST_SPLIT else 0
        return (self.unknown_device_rate[idx], self.robotic_rate[idx])

    def to_dict(self) -> dict[str, Any]:
        return {
            "country_weights": {label: w for label, w in self.country_weights},
            "device_weights": {label: w for label, w in self.device_weights},
            "unknown_device_rate": list(self.unknown_device_rate),
            "robotic_rate": list(self.robotic_rate),
            "ioc_rate": self.ioc_rate,
            "icg_rate": self.icg_rate,
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "ProvenanceModel":
        kwargs: dict[str, Any] = {}
        if "country_weights" in d:
            kwargs["country_weights"] = tuple(d["country_weights"].items())
        if "device_weights" in d:
            kwargs["device_weights"] = tuple(d["device_weights"].items())
        if "unknown_device_rate" in d:
            kwargs["unknown_device_rate"] = tuple(d["unknown_device_rate"])
        if "robotic_rate" in d:
            kwargs["robotic_rate"] = tuple(d["robotic_rate"])
        for key in ("ioc_rate", "icg_rate"):
            if key in d:
                kwargs[key] = d[key]
        return ProvenanceModel(**kwargs)


@dataclass(frozen=True)
class SimConfig:
    seed: int = 20240131
    n_videos: int = 1000
    n_annotators: int = 20
    test_fraction: float = 0.3
    dropout_rate: float = 0.0
    funnel: FunnelModel = field(default_factory=FunnelModel)
    agreement: AgreementModel = field(default_factory=AgreementModel)
    confidence: ConfidenceModel = field(default_factory=ConfidenceModel)
    provenance: ProvenanceModel = field(default_factory=ProvenanceModel)

    def __post_init__(self) -> None:
        if self.n_videos < 1:
            raise InvalidConfig("n_videos must be positive")
        if self.n_annotators < 3:
            raise InvalidConfig("n_annotators must be at least the required coverage")
        _check_rate("test_fraction", self.test_fraction)
        _check_rate("dropout_rate", self.dropout_rate)

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "n_videos": self.n_videos,
            "n_annotators": self.n_annotators,
            "test_fraction": self.test_fraction,
            "dropout_rate": self.dropout_rate,
            "funnel": self.funnel.to_dict(),
            "agreement": self.agreement.to_dict(),
            "confidence": self.confidence.to_dict(),
            "provenance": self.provenance.to_dict(),
        }

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "SimConfig":
        kwargs: dict[str, Any] = {
            k: d[k]
            for k in ("seed", "n_videos", "n_annotators", "test_fraction", "dropout_rate")
            if k in d
        }
        if "funnel" in d:
            kwargs["funnel"] = FunnelModel.from_dict(d["funnel"])
        if "agreement" in d:
            kwargs["agreement"] = AgreementModel.from_dict(d["agreement"])
        if "confidence" in d:
            kwargs["confidence"] = ConfidenceModel.from_dict(d["confidence"])
        if "provenance" in d:
            kwargs["provenance"] = ProvenanceModel.from_dict(d["provenance"])
        return SimConfig(**kwargs)


# ---------------------------------------------------------------------------
# Distribution plumbing
# ---------------------------------------------------------------------------

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def _std_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT2PI


def _std_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / _SQRT2))


def clamped_normal_moments(mu: float, sigma: float) -> tuple[float, float]:
    """Mean and SD of min(1, max(0, N(mu, sigma))).

    Clamping piles probability mass onto the endpoints, which drags the mean
    towards 0.5 and shrinks the spread; the closed form keeps calibration
    exact instead of relying on sampling.
    """
    a = (0.0 - mu) / sigma
    b = (1.0 - mu) / sigma
    p_low = _std_cdf(a)
    p_high = 1.0 - _std_cdf(b)
    p_mid = _std_cdf(b) - _std_cdf(a)
    # E[X; a < Z < b] and E[X^2; a < Z < b] for X = mu + sigma Z.
    ex_mid = mu * p_mid + sigma * (_std_pdf(a) - _std_pdf(b))
    ex2_mid = (
        mu * mu * p_mid
        + 2.0 * mu * sigma * (_std_pdf(a) - _std_pdf(b))
        + sigma * sigma * (p_mid + a * _std_pdf(a) - b * _std_pdf(b))
    )
    mean = p_high * 1.0 + ex_mid
    second = p_high * 1.0 + ex2_mid
    var = max(second - mean * mean, 0.0)
    return mean, math.sqrt(var)


@lru_cache(maxsize=None)
def calibrate_clamped_normal(target_mean: float, target_sd: float) -> tuple[float, float]:
    """Pre-clamp (mu, sigma) whose clamped distribution hits the targets.

    Damped fixed-point iteration; raises InvalidConfig when the pair is
    unreachable (an SD too large for a mean that close to the endpoints).
    """
    mu, sigma = target_mean, target_sd
    for _ in range(500):
        mean, sd = clamped_normal_moments(mu, sigma)
        mu += 0.9 * (target_mean - mean)
        sigma *= min(max((target_sd / sd) ** 0.9, 0.5), 2.0)
        sigma = min(max(sigma, 1e-4), 5.0)
    mean, sd = clamped_normal_moments(mu, sigma)
    if abs(mean - target_mean) > 1e-6 or abs(sd - target_sd) > 1e-6:
        raise InvalidConfig(
            f"cannot realize confidence mean={target_mean}, sd={target_sd} "
            "with a clamped normal"
        )
    return mu, sigma


@lru_cache(maxsize=None)
def derive_flip_rate(full_agreement_rate: float) -> float:
    """Per-rater verdict flip probability giving the target agreement rate.

    With independent flips at rate phi, all three raters agree exactly when
    zero or three flips happen: (1-phi)^3 + phi^3, strictly decreasing on
    [0, 0.5]; invert by bisection.
    """
    lo, hi = 0.0, 0.5
    for _ in range(80):
        mid = (lo + hi) / 2.0
        if (1.0 - mid) ** 3 + mid**3 >= full_agreement_rate:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def video_mode_error(flip_rate: float) -> float:
    """Probability that the majority of three flipped verdicts is wrong."""
    return 3.0 * flip_rate**2 * (1.0 - flip_rate) + flip_rate**3


def corrected_positive_rate(target: float, flip_rate: float) -> float:
    """Latent verdict rate whose fused majority hits the target rate.

    The majority channel maps a latent rate r to r(1-e) + (1-r)e with
    e = video_mode_error(flip_rate); solve for r.
    """
    e = video_mode_error(flip_rate)
    r = (target - e) / (1.0 - 2.0 * e)
    if not 0.0 <= r <= 1.0:
        raise InvalidConfig(
            f"video positive rate {target} is unreachable at flip rate {flip_rate:.4f}"
        )
    return r


# ---------------------------------------------------------------------------
# Latent case truth and rater behavior
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VideoLatent:
    """Ground truth behind one case: per-criterion verdicts and onsets.

    ``onset`` holds the annotated-position index (0-based) at which the
    criterion becomes achieved, or None when it never is.
    """

    achieved: tuple[int, int, int]
    onset: tuple[int | None, int | None, int | None]

    def to_dict(self) -> dict[str, Any]:
        return {"achieved": list(self.achieved), "onset": list(self.onset)}

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "VideoLatent":
        return VideoLatent(
            achieved=tuple(int(v) for v in d["achieved"]),
            onset=tuple(None if v is None else int(v) for v in d["onset"]),
        )


_MAX_ONSET = 15  # latest latent onset; leaves room for +2 rater jitter
_LATE_ONSETS = (15, 16, 17)  # where a false-positive rater places the event


def _rater_rng(seed: int, clip_id: str, annotator_id: str) -> random.Random:
    # String-seeded so any (clip, rater) pair replays identically no matter
    # when or in which order the assessment is synthesized.
    return random.Random(f"{seed}/{clip_id}/{annotator_id}")


def synthesize_assessment(
    config: SimConfig,
    latent: VideoLatent,
    clip_id: str,
    annotator_id: str,
    split: str | None,
) -> Assessment:
    """One rater's assessment of one clip, deterministic in (config.seed,
    clip_id, annotator_id)."""
    rng = _rater_rng(config.seed, clip_id, annotator_id)
    flip = config.agreement.flip_rate
    weights = config.agreement.onset_jitter_weights
    half = len(weights) // 2
    offsets = range(-half, half + 1)

    columns: list[list[int]] = []
    video_level: list[int] = []
    for k in range(3):
        verdict = latent.achieved[k]
        if rng.random() < flip:
            verdict = 1 - verdict
        if verdict:
            if latent.achieved[k]:
                jitter = rng.choices(list(offsets), weights=weights)[0]
                onset = min(max(latent.onset[k] + jitter, 0), N_POSITIONS - 1)
            else:
                onset = rng.choice(_LATE_ONSETS)
            columns.append([1 if p >= onset else 0 for p in range(N_POSITIONS)])
        else:
            columns.append([0] * N_POSITIONS)
        video_level.append(verdict)

    mu, sigma = calibrate_clamped_normal(*config.confidence.params(split))
    confidence = min(1.0, max(0.0, rng.gauss(mu, sigma)))

    frame_labels = tuple(
        (columns[0][p], columns[1][p], columns[2][p]) for p in range(N_POSITIONS)
    )
    return Assessment(
        clip_id=clip_id,
        annotator_id=annotator_id,
        frame_labels=frame_labels,
        confidence=confidence,
        video_level=tuple(video_level),
    )


# ---------------------------------------------------------------------------
# Workforce
# ---------------------------------------------------------------------------


def _activated_annotator(annotator_id: str, exam_score: float) -> Annotator:
    a = Annotator(annotator_id=annotator_id)
    for event in (
        EligibilityPassed(),
        TrainingStarted(),
        ExamSubmitted(score=exam_score),
        ExamGraded(),
        Activated(),
    ):
        a = annotator_transition(a, event)
    return a


def generate_workforce(config: SimConfig, rng: random.Random) -> list[Annotator]:
    """Activated raters; each then drops out with ``config.dropout_rate``."""
    out = []
    for i in range(config.n_annotators):
        a = _activated_annotator(f"ann-{i + 1:03d}", exam_score=rng.uniform(0.75, 1.0))
        if config.dropout_rate > 0 and rng.random() < config.dropout_rate:
            a = annotator_transition(a, DroppedOut())
        out.append(a)
    return out


def simulate_funnel(
    model: FunnelModel, seed: int = 0, contacted: int | None = None
) -> list[Annotator]:
    """Replay recruitment for a cohort of candidates.

    Every stage exit is an independent draw against the model's
    probabilities. Exam scores land above the passing threshold exactly for
    candidates drawn to pass; candidates drawn to fail walk away before
    grading, which files them as dropped rather than failed.
    """
    rng = random.Random(seed)
    pool: list[Annotator] = []
    for i in range(contacted if contacted is not None else model.contacted):
        a = Annotator(annotator_id=f"cand-{i + 1:04d}")
        u = rng.random()
        if u < model.p_no_clinical_background:
            pool.append(annotator_transition(a, EligibilityRejected()))
            continue
        if u < model.p_no_clinical_background + model.p_drop_before_training:
            pool.append(annotator_transition(a, DroppedOut()))
            continue
        a = annotator_transition(a, EligibilityPassed())
        a = annotator_transition(a, TrainingStarted())
        if rng.random() < model.p_drop_in_training:
            pool.append(annotator_transition(a, DroppedOut()))
            continue
        if rng.random() < model.p_pass_exam:
            a = annotator_transition(a, ExamSubmitted(score=rng.uniform(0.75, 1.0)))
            a = annotator_transition(a, ExamGraded())
            if rng.random() < model.p_activate:
                a = annotator_transition(a, Activated())
        else:
            a = annotator_transition(a, ExamSubmitted(score=rng.uniform(0.30, 0.74)))
            a = annotator_transition(a, DroppedOut())
        pool.append(a)
    return pool


def reference_funnel_pool() -> list[Annotator]:
    """The recruitment history the funnel defaults are fitted to, rebuilt
    exactly: 106 contacted, of whom 2 lacked a clinical background, 33 never
    started training, 4 left during training, 40 sat the exam but walked away
    unscored, 7 qualified without activating, and 20 form the active team."""
    pool: list[Annotator] = []
    i = 0

    def next_id() -> str:
        nonlocal i
        i += 1
        return f"cand-{i:04d}"

    for _ in range(2):
        pool.append(annotator_transition(Annotator(next_id()), EligibilityRejected()))
    for _ in range(33):
        pool.append(annotator_transition(Annotator(next_id()), DroppedOut()))
    for _ in range(4):
        a = Annotator(next_id())
        a = annotator_transition(a, EligibilityPassed())
        a = annotator_transition(a, TrainingStarted())
        pool.append(annotator_transition(a, DroppedOut()))
    for j in range(40):
        a = Annotator(next_id())
        a = annotator_transition(a, EligibilityPassed())
        a = annotator_transition(a, TrainingStarted())
        a = annotator_transition(a, ExamSubmitted(score=0.40 + 0.008 * j))
        pool.append(annotator_transition(a, DroppedOut()))
    for j in range(27):
        a = Annotator(next_id())
        a = annotator_transition(a, EligibilityPassed())
        a = annotator_transition(a, TrainingStarted())
        a = annotator_transition(a, ExamSubmitted(score=0.76 + 0.008 * j))
        a = annotator_transition(a, ExamGraded())
        if j >= 7:
            a = annotator_transition(a, Activated())
        pool.append(a)
    return pool


# ---------------------------------------------------------------------------
# Pool generation
# ---------------------------------------------------------------------------


@dataclass
class SimulatedPool:
    """Everything one seeded generation run produced."""

    config: SimConfig
    annotators: list[Annotator]
    videos: list[VideoCase]
    latents: dict[str, VideoLatent]
    assessments: dict[str, tuple[Assessment, ...]]
    fused: dict[str, FusedClip]
    records: list[ClipRecord]

    def funnel(self) -> FunnelReport:
        return funnel_report(self.annotators)

    def active_annotator_ids(self) -> list[str]:
        return sorted(
            a.annotator_id for a in self.annotators if a.state is AnnotatorState.ACTIVE
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "annotators": [a.to_dict() for a in self.annotators],
            "videos": [v.to_dict() for v in self.videos],
            "latents": {cid: self.latents[cid].to_dict() for cid in sorted(self.latents)},
            "assessments": {
                cid: [a.to_dict() for a in self.assessments[cid]]
                for cid in sorted(self.assessments)
            },
            "fused": {cid: self.fused[cid].to_dict() for cid in sorted(self.fused)},
            "records": [r.to_dict() for r in self.records],
        }


def _weighted_choice(
    rng: random.Random, weights: tuple[tuple[str, float], ...]
) -> str:
    return rng.choices(
        [label for label, _ in weights], weights=[w for _, w in weights]
    )[0]


def _sample_provenance(
    rng: random.Random, model: ProvenanceModel, split: str | None
) -> CaseProvenance:
    unknown_device_rate, robotic_rate = model.split_rates(split)
    country = _weighted_choice(rng, model.country_weights)
    device = (
        None
        if rng.random() < unknown_device_rate
        else _weighted_choice(rng, model.device_weights)
    )
    approach = (
        SurgicalApproach.ROBOTIC
        if rng.random() < robotic_rate
        else SurgicalApproach.LAPAROSCOPIC
    )
    return CaseProvenance(
        country=country,
        device_vendor=device,
        approach=approach,
        used_ioc=rng.random() < model.ioc_rate,
        used_icg=rng.random() < model.icg_rate,
    )


def generate_pool(config: SimConfig) -> SimulatedPool:
    """Fabricate a full cohort: cases, workforce, assessments, fused labels.

    Deterministic in ``config.seed``; every artifact is built through the
    domain transition functions so invalid fixtures cannot exist.
    """
    rng = random.Random(config.seed)
    annotators = generate_workforce(config, rng)
    active = sorted(
        a.annotator_id for a in annotators if a.state is AnnotatorState.ACTIVE
    )
    if len(active) < 3:
        raise InvalidConfig("fewer than three active annotators survive dropout")

    flip = config.agreement.flip_rate
    latent_rates = tuple(
        corrected_positive_rate(t, flip) for t in config.agreement.video_positive_rate
    )

    n_test = round(config.n_videos * config.test_fraction)
    splits = [TEST_SPLIT] * n_test + [TRAIN_SPLIT] * (config.n_videos - n_test)
    rng.shuffle(splits)

    videos: list[VideoCase] = []
    latents: dict[str, VideoLatent] = {}
    assessments: dict[str, tuple[Assessment, ...]] = {}
    fused: dict[str, FusedClip] = {}
    records: list[ClipRecord] = []

    for i in range(config.n_videos):
        case_id = f"case-{i + 1:04d}"
        split = splits[i]
        provenance = _sample_provenance(rng, config.provenance, split)
        duration = rng.uniform(1800.0, 7200.0)
        clipping_timestamp = rng.uniform(300.0, duration - 30.0)

        achieved = tuple(1 if rng.random() < r else 0 for r in latent_rates)
        onset = tuple(rng.randint(0, _MAX_ONSET) if a else None for a in achieved)
        latent = VideoLatent(achieved=achieved, onset=onset)

        case = VideoCase(
            case_id=case_id,
            media_uri=f"file:///pool/{case_id}.mp4",
            duration_s=duration,
            provenance=provenance,
            split=split,
        )
        case = video_transition(case, ScreeningStarted())
        for rater in ("screener-1", "screener-2"):
            verdict = videoflow.screen(
                rater,
                duration,
                clipping_timestamp=clipping_timestamp,
                used_ioc=provenance.used_ioc,
                used_icg=provenance.used_icg,
                approach=provenance.approach,
            )
            case = video_transition(case, PreAnnotationSubmitted(entry=verdict))
        case = video_transition(
            case, ConcordanceReached(metadata=case.preannotation_chain[-1])
        )
        clip = videoflow.extract_clip(case)
        case = video_transition(case, ClipExtracted(clip=clip))
        case = video_transition(case, AnnotationStarted())
        case = video_transition(case, AllAssessmentsIn())

        raters = sorted(rng.sample(active, 3))
        clip_assessments = tuple(
            synthesize_assessment(config, latent, clip.clip_id, rater, split)
            for rater in raters
        )
        fused_clip = fuse_assessments(clip_assessments)
        case = video_transition(case, FusionCompleted())

        videos.append(case)
        latents[case_id] = latent
        assessments[clip.clip_id] = clip_assessments
        fused[clip.clip_id] = fused_clip
        records.append(
            make_clip_record(
                fused_clip,
                case_id=case_id,
                split=split,
                provenance=provenance,
                assessments=clip_assessments,
            )
        )

    return SimulatedPool(
        config=config,
        annotators=annotators,
        videos=videos,
        latents=latents,
        assessments=assessments,
        fused=fused,
        records=records,
    )


def save_pool(pool: SimulatedPool, out_dir: str | Path) -> dict[str, Path]:
    """Write a pool to a directory in the platform's JSON-lines formats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    def write_jsonl(name: str, rows: Iterable[Mapping[str, Any]]) -> None:
        path = out / name
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=False) + "\n")
        paths[name] = path

    write_jsonl("videos.jsonl", (v.to_dict() for v in pool.videos))
    write_jsonl("annotators.jsonl", (a.to_dict() for a in pool.annotators))
    write_jsonl(
        "assessments.jsonl",
        (a.to_dict() for cid in sorted(pool.assessments) for a in pool.assessments[cid]),
    )
    write_jsonl("clip_records.jsonl", (r.to_dict() for r in pool.records))
    write_jsonl("fused_clips.jsonl", (pool.fused[cid].to_dict() for cid in sorted(pool.fused)))
    config_path = out / "sim_config.json"
    config_path.write_text(json.dumps(pool.config.to_dict(), indent=2) + "\n", "utf-8")
    paths["sim_config.json"] = config_path
    return paths


# ---------------------------------------------------------------------------
# Campaign replay
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TickRecord:
    tick_id: int
    issued: int
    completed: int
    revoked: int
    dropped: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "tick_id": self.tick_id,
            "issued": self.issued,
            "completed": self.completed,
            "revoked": self.revoked,
            "dropped": list(self.dropped),
        }


@dataclass
class CampaignTranscript:
    ticks: list[TickRecord]
    completed: bool
    fused_clips: int
    total_events: int
    notifications: int

    @property
    def tick_count(self) -> int:
        return len(self.ticks)

    def to_dict(self) -> dict[str, Any]:
        return {
            "ticks": [t.to_dict() for t in self.ticks],
            "completed": self.completed,
            "fused_clips": self.fused_clips,
            "total_events": self.total_events,
            "notifications": self.notifications,
        }


def run_campaign(
    pool: SimulatedPool,
    *,
    platform: PlatformConfig | None = None,
    annotator_ids: Sequence[str] | None = None,
    completion_rate: float = 1.0,
    dropout_rate: float | None = None,
    max_ticks: int = 64,
    start: datetime | None = None,
    store_dir: str | Path | None = None,
    notifier: NotificationPort | None = None,
) -> CampaignTranscript:
    """Drive a generated pool through a live orchestrator until every clip is
    fused, raising ``DeadlockDetected`` if coverage can no longer grow.

    The simulated clock starts at ``start`` and advances one cadence per
    tick. ``annotator_ids`` restricts the registered workforce (defaults to
    the pool's full roster); ``completion_rate`` is the per-tick probability
    that an outstanding assignment comes back; ``dropout_rate`` (defaulting
    to the pool's own) is the per-tick probability an active rater leaves.
    """
    if not 0.0 <= completion_rate <= 1.0:
        raise InvalidConfig("completion_rate must lie in [0, 1]")
    drop = pool.config.dropout_rate if dropout_rate is None else dropout_rate
    _check_rate("dropout_rate", drop)

    rng = random.Random(f"{pool.config.seed}/campaign")
    now0 = start or datetime(2026, 3, 2, 9, 0, tzinfo=timezone.utc)
    current = [now0]
    notifier = notifier if notifier is not None else MemoryNotifier()
    orch = Orchestrator(
        platform or PlatformConfig(),
        notifier,
        clock=lambda: current[0],
        store_dir=store_dir,
    )

    roster = (
        pool.annotators
        if annotator_ids is None
        else [a for a in pool.annotators if a.annotator_id in set(annotator_ids)]
    )
    for annotator in roster:
        orch.register_annotator(annotator)

    for case in pool.videos:
        orch.intake_case(
            VideoCase(
                case_id=case.case_id,
                media_uri=case.media_uri,
                duration_s=case.duration_s,
                provenance=case.provenance,
                split=case.split,
            )
        )
        orch.start_screening(case.case_id)
        for verdict in case.preannotation_chain:
            orch.submit_screening_verdict(case.case_id, verdict)
        orch.extract_clip(case.case_id)

    n_clips = len(pool.videos)
    cadence = timedelta(days=orch.config.cadence_days)
    ticks: list[TickRecord] = []
    done = False
    log_mark = len(orch.log)

    for tick_index in range(max_ticks):
        now = now0 + tick_index * cadence
        current[0] = now

        dropped_now: list[str] = []
        if tick_index > 0 and drop > 0:
            for annotator_id in orch.active_annotator_ids():
                if rng.random() < drop:
                    orch.annotator_event(annotator_id, DroppedOut())
                    dropped_now.append(annotator_id)

        if tick_index == 0:
            orch.run_tick(now=now)
        else:
            orch.run_due_effects(now)  # fires the queued tick

        issued = revoked = 0
        for event in orch.log[log_mark:]:
            kind = event.payload.get("kind")
            if kind == "TICK_RUN":
                issued += len(event.payload["assignments"])
            elif kind == "ASSIGNMENTS_REVOKED":
                revoked += len(event.payload["assignments"])

        completed = 0
        active_now = set(orch.active_annotator_ids())
        outstanding = sorted(
            orch.state.coverage.outstanding_assignments(),
            key=lambda a: (a.clip_id, a.annotator_id),
        )
        for assignment in outstanding:
            if assignment.annotator_id not in active_now:
                continue
            if rng.random() >= completion_rate:
                continue
            case_id = orch.state.clips[assignment.clip_id].case_id
            assessment = synthesize_assessment(
                pool.config,
                pool.latents[case_id],
                assignment.clip_id,
                assignment.annotator_id,
                orch.state.videos[case_id].split,
            )
            orch.accept_assessment(
                assessment,
                idempotency_key=f"{assignment.clip_id}/{assignment.annotator_id}",
            )
            completed += 1

        orch.run_due_effects(now)  # fusion of anything just completed
        ticks.append(
            TickRecord(
                tick_id=tick_index,
                issued=issued,
                completed=completed,
                revoked=revoked,
                dropped=tuple(dropped_now),
            )
        )
        log_mark = len(orch.log)

        if len(orch.state.fused) == n_clips:
            done = True
            break
        if issued == 0 and not orch.state.coverage.outstanding_assignments():
            starving = sorted(
                clip_id
                for clip_id in orch.state.coverage.clips
                if orch.state.coverage.completed_count(clip_id)
                < orch.config.required_coverage
            )
            raise DeadlockDetected(starving)

    return CampaignTranscript(
        ticks=ticks,
        completed=done,
        fused_clips=len(orch.state.fused),
        total_events=len(orch.log),
        notifications=len(getattr(notifier, "sent", [])),
    )

"""Operations platform for a multi-rater surgical video annotation challenge.

The package is organised around an append-only event log:

* :mod:`cvsops.domain`       entities, events, and the two state machines
* :mod:`cvsops.videoflow`    screening verdicts and dual-rater adjudication
* :mod:`cvsops.annotators`   recruitment funnel, exam grading
* :mod:`cvsops.scheduling`   fair round-robin assignment with coverage caps
* :mod:`cvsops.fusion`       three-rater label fusion and dataset statistics
* :mod:`cvsops.evaluation`   detection / calibration / robustness scoring
* :mod:`cvsops.orchestrator` the event-sourced core tying it all together
* :mod:`cvsops.simulator`    synthetic pools and full campaign replays
* :mod:`cvsops.service`      HTTP facade
* :mod:`cvsops.report`       figures and delimited summaries
"""

from __future__ import annotations

from .config import PlatformConfig, load_config
from .domain import (
    AgreementLevel,
    Annotator,
    AnnotatorState,
    Assessment,
    PreAnnotation,
    QualifiedClip,
    VideoCase,
    VideoState,
)
from .evaluation import (
    MetricsReport,
    Submission,
    evaluate_submission,
    leaderboard,
)
from .fusion import FusedClip
from .orchestrator import JsonlNotifier, MemoryNotifier, Orchestrator
from .simulator import SimConfig, generate_pool, run_campaign

__version__ = "0.1.0"

__all__ = [
    "AgreementLevel",
    "Annotator",
    "AnnotatorState",
    "Assessment",
    "FusedClip",
    "JsonlNotifier",
    "MemoryNotifier",
    "MetricsReport",
    "Orchestrator",
    "PlatformConfig",
    "PreAnnotation",
    "QualifiedClip",
    "SimConfig",
    "Submission",
    "VideoCase",
    "VideoState",
    "evaluate_submission",
    "generate_pool",
    "leaderboard",
    "load_config",
    "run_campaign",
    "__version__",
]

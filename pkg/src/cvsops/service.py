"""HTTP face of the platform.

An app factory wraps one live ``Orchestrator``. Conventions:

* bodies and responses are the domain codecs' dicts, nothing reshaped;
* a static bearer token (when configured) guards every route except the
  health probe;
* every mutating route requires an ``Idempotency-Key`` header and replays
  the original response when the same key is seen again;
* rater-facing routes only ever expose the blind payload of a clip, so
  provenance stays inside the platform.

Submissions are evaluated synchronously on arrival against the fused pool
and the resulting reports back the /metrics and /leaderboard resources.
"""

from __future__ import annotations

from typing import Any

from fastapi import Depends, FastAPI, Header, HTTPException, Request
from fastapi.responses import JSONResponse

from . import scheduling, videoflow
from .config import PlatformConfig
from .domain import (
    Annotator,
    IllegalTransition,
    PreAnnotation,
    ValidationError,
    VideoCase,
    decode_event,
)
from .evaluation import (
    EmptySplit,
    MetricsReport,
    MissingClip,
    MissingFrame,
    Submission,
    evaluate_submission,
    leaderboard,
    robustness_scatter,
)
from .fusion import FusionInputError
from .orchestrator import DuplicateEntity, Orchestrator, UnknownEntity
from .util import parse_utc

_CONFLICT = (
    IllegalTransition,
    DuplicateEntity,
    videoflow.ChainClosed,
    videoflow.DuplicateRater,
    scheduling.DuplicateAssessment,
    FusionInputError,
)
_NOT_FOUND = (UnknownEntity, scheduling.UnknownAssignment)
_BAD_REQUEST = (
    ValidationError,
    videoflow.NotQualified,
    videoflow.WindowUnderflow,
    MissingClip,
    MissingFrame,
    EmptySplit,
    ValueError,
)


def create_app(
    orchestrator: Orchestrator | None = None,
    *,
    config: PlatformConfig | None = None,
    api_token: str | None = None,
) -> FastAPI:
    """Build the API over an orchestrator (a fresh in-memory one by default)."""
    orch = orchestrator or Orchestrator(config or PlatformConfig())
    token = api_token if api_token is not None else orch.config.api_token

    app = FastAPI(title="cvsops", docs_url=None, redoc_url=None)
    app.state.orchestrator = orch
    app.state.reports = {}  # team_id -> MetricsReport
    app.state.replay = {}  # "path:idempotency-key" -> response body

    def require_auth(authorization: str | None = Header(default=None)) -> None:
        if token and authorization != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or bad bearer token")

    def idempotency_key(
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ) -> str:
        if not idempotency_key:
            raise HTTPException(
                status_code=400, detail="mutations require an Idempotency-Key header"
            )
        return idempotency_key

    def replayed(route: str, key: str) -> Any | None:
        return app.state.replay.get(f"{route}:{key}")

    def remember(route: str, key: str, body: Any) -> Any:
        app.state.replay[f"{route}:{key}"] = body
        return body

    @app.exception_handler(Exception)
    async def _domain_errors(request: Request, exc: Exception) -> JSONResponse:
        if isinstance(exc, _CONFLICT):
            status = 409
        elif isinstance(exc, _NOT_FOUND):
            status = 404
        elif isinstance(exc, _BAD_REQUEST):
            status = 400
        else:
            status = 500
        return JSONResponse(
            status_code=status, content={"detail": f"{type(exc).__name__}: {exc}"}
        )

    @app.get("/healthz")
    def healthz() -> dict[str, str]:
        return {"status": "ok"}

    # -- read side ----------------------------------------------------------

    @app.get("/funnel", dependencies=[Depends(require_auth)])
    def get_funnel() -> dict[str, Any]:
        return orch.funnel().to_dict()

    @app.get("/annotators", dependencies=[Depends(require_auth)])
    def list_annotators() -> list[dict[str, Any]]:
        return [
            orch.state.annotators[a].to_dict() for a in sorted(orch.state.annotators)
        ]

    @app.get("/annotators/{annotator_id}", dependencies=[Depends(require_auth)])
    def get_annotator(annotator_id: str) -> dict[str, Any]:
        annotator = orch.state.annotators.get(annotator_id)
        if annotator is None:
            raise UnknownEntity(annotator_id)
        return annotator.to_dict()

    @app.get("/videos", dependencies=[Depends(require_auth)])
    def list_videos() -> list[dict[str, Any]]:
        return [orch.state.videos[c].to_dict() for c in sorted(orch.state.videos)]

    @app.get("/videos/{case_id}", dependencies=[Depends(require_auth)])
    def get_video(case_id: str) -> dict[str, Any]:
        case = orch.state.videos.get(case_id)
        if case is None:
            raise UnknownEntity(case_id)
        return case.to_dict()

    @app.get("/assignments", dependencies=[Depends(require_auth)])
    def list_assignments(annotator_id: str) -> list[dict[str, Any]]:
        """A rater's open work: assignment bookkeeping plus the blind payload."""
        rows = []
        for assignment in orch.state.coverage.outstanding_assignments():
            if assignment.annotator_id != annotator_id:
                continue
            view = orch.blind_payload(annotator_id, assignment.clip_id)
            rows.append({"assignment": assignment.to_dict(), "clip": view.to_dict()})
        rows.sort(key=lambda r: r["assignment"]["clip_id"])
        return rows

    @app.get("/assignments/overdue", dependencies=[Depends(require_auth)])
    def list_overdue(now: str | None = None) -> list[dict[str, Any]]:
        at = parse_utc(now) if now else orch.clock()
        return [a.to_dict() for a in scheduling.list_overdue(orch.state.coverage, at)]

    @app.get("/coverage", dependencies=[Depends(require_auth)])
    def get_coverage() -> dict[str, Any]:
        coverage = orch.state.coverage
        return {
            "clips": len(coverage.clips),
            "histogram": {
                str(k): v
                for k, v in sorted(
                    coverage.coverage_histogram(orch.config.required_coverage).items()
                )
            },
            "fully_annotated": len(
                coverage.fully_annotated(orch.config.required_coverage)
            ),
        }

    @app.get("/metrics/{team_id}", dependencies=[Depends(require_auth)])
    def get_metrics(team_id: str) -> dict[str, Any]:
        report = app.state.reports.get(team_id)
        if report is None:
            raise UnknownEntity(team_id)
        return report.to_dict()

    @app.get("/leaderboard", dependencies=[Depends(require_auth)])
    def get_leaderboard() -> dict[str, Any]:
        reports = [app.state.reports[t] for t in sorted(app.state.reports)]
        if not reports:
            return {"rows": [], "scatter": []}
        rows = leaderboard(reports)
        scatter = robustness_scatter(
            {
                r.team_id: {
                    split: mr.mean
                    for split, mr in r.variant_map.items()
                    if mr.mean is not None
                }
                for r in reports
            }
        )
        return {
            "rows": [r.to_dict() for r in rows],
            "scatter": [
                {"team_id": p.team_id, "mean": p.mean, "std": p.std} for p in scatter
            ],
        }

    # -- write side ---------------------------------------------------------

    @app.post("/annotators", dependencies=[Depends(require_auth)])
    def register_annotator(
        body: dict[str, Any], key: str = Depends(idempotency_key)
    ) -> dict[str, Any]:
        if (prior := replayed("/annotators", key)) is not None:
            return prior
        annotator = Annotator.from_dict(body)
        orch.register_annotator(annotator)
        return remember("/annotators", key, annotator.to_dict())

    @app.post("/annotators/{annotator_id}/events", dependencies=[Depends(require_auth)])
    def annotator_event(
        annotator_id: str, body: dict[str, Any], key: str = Depends(idempotency_key)
    ) -> dict[str, Any]:
        route = f"/annotators/{annotator_id}/events"
        if (prior := replayed(route, key)) is not None:
            return prior
        updated = orch.annotator_event(annotator_id, decode_event(body))
        return remember(route, key, updated.to_dict())

    @app.post("/videos", dependencies=[Depends(require_auth)])
    def intake_video(
        body: dict[str, Any], key: str = Depends(idempotency_key)
    ) -> dict[str, Any]:
        if (prior := replayed("/videos", key)) is not None:
            return prior
        case = VideoCase.from_dict(body)
        orch.intake_case(case)
        return remember("/videos", key, orch.state.videos[case.case_id].to_dict())

    @app.post("/videos/{case_id}/screening", dependencies=[Depends(require_auth)])
    def start_screening(case_id: str, key: str = Depends(idempotency_key)) -> dict[str, Any]:
        route = f"/videos/{case_id}/screening"
        if (prior := replayed(route, key)) is not None:
            return prior
        orch.start_screening(case_id)
        return remember(route, key, orch.state.videos[case_id].to_dict())

    @app.post("/videos/{case_id}/verdicts", dependencies=[Depends(require_auth)])
    def submit_verdict(
        case_id: str, body: dict[str, Any], key: str = Depends(idempotency_key)
    ) -> dict[str, Any]:
        route = f"/videos/{case_id}/verdicts"
        if (prior := replayed(route, key)) is not None:
            return prior
        orch.submit_screening_verdict(case_id, PreAnnotation.from_dict(body))
        return remember(route, key, orch.state.videos[case_id].to_dict())

    @app.post("/videos/{case_id}/blur", dependencies=[Depends(require_auth)])
    def complete_blur(case_id: str, key: str = Depends(idempotency_key)) -> dict[str, Any]:
        route = f"/videos/{case_id}/blur"
        if (prior := replayed(route, key)) is not None:
            return prior
        orch.complete_blur(case_id)
        return remember(route, key, orch.state.videos[case_id].to_dict())

    @app.post("/videos/{case_id}/clip", dependencies=[Depends(require_auth)])
    def extract_clip(case_id: str, key: str = Depends(idempotency_key)) -> dict[str, Any]:
        route = f"/videos/{case_id}/clip"
        if (prior := replayed(route, key)) is not None:
            return prior
        clip = orch.extract_clip(case_id)
        return remember(route, key, clip.to_dict())

    @app.post("/ticks", dependencies=[Depends(require_auth)])
    def run_tick(
        body: dict[str, Any] | None = None, key: str = Depends(idempotency_key)
    ) -> dict[str, Any]:
        if (prior := replayed("/ticks", key)) is not None:
            return prior
        body = body or {}
        now = parse_utc(body["now"]) if "now" in body else None
        batch = orch.run_tick(now=now, seed=body.get("seed"))
        return remember(
            "/ticks",
            key,
            {
                "tick_id": batch.tick_id,
                "assignments": [a.to_dict() for a in batch.assignments],
            },
        )

    @app.post("/assessments", dependencies=[Depends(require_auth)])
    def submit_assessment(
        body: dict[str, Any], key: str = Depends(idempotency_key)
    ) -> dict[str, Any]:
        from .domain import Assessment

        # accept_assessment dedupes on the key itself, so a replay returns
        # the original result without appending anything.
        return orch.accept_assessment(Assessment.from_dict(body), idempotency_key=key)

    @app.post("/effects/run", dependencies=[Depends(require_auth)])
    def run_effects(
        body: dict[str, Any] | None = None, key: str = Depends(idempotency_key)
    ) -> list[dict[str, Any]]:
        if (prior := replayed("/effects/run", key)) is not None:
            return prior
        body = body or {}
        now = parse_utc(body["now"]) if "now" in body else None
        executed = orch.run_due_effects(now)
        return remember("/effects/run", key, [e.to_dict() for e in executed])

    @app.post("/submissions", dependencies=[Depends(require_auth)])
    def submit_predictions(
        body: dict[str, Any], key: str = Depends(idempotency_key)
    ) -> dict[str, Any]:
        if (prior := replayed("/submissions", key)) is not None:
            return prior
        sub = Submission(
            team_id=body["team_id"],
            predictions={
                cid: tuple(tuple(float(p) for p in row) for row in rows)
                for cid, rows in body["predictions"].items()
            },
            metadata=body.get("metadata", {}),
        )
        report: MetricsReport = evaluate_submission(
            sub, orch.state.fused, orch.clip_records()
        )
        app.state.reports[sub.team_id] = report
        return remember("/submissions", key, report.to_dict())

    return app

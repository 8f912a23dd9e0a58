"""Command-line front end.

One executable, ``cvsops``, with a subcommand per operational task:

* ``simulate``     generate a synthetic annotated pool on disk
* ``intake``       ingest an intake manifest into an event store
* ``screen``       record screening verdicts (single or from a log file)
* ``schedule``     run a scheduling tick against an event store
* ``fuse``         fuse every fully-annotated clip in an event store
* ``evaluate``     score one team's predictions and write metrics JSON
* ``leaderboard``  rank several metrics files, write CSV/JSON plus figures
* ``report``       render funnel, coverage and dataset figures for a store
* ``serve``        expose an event store over HTTP
* ``replay``       rebuild state from the log and print a summary

Every command that touches an event store takes ``--store DIR`` and an
optional ``--config FILE`` (YAML, same keys as ``PlatformConfig``).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from . import report as reporting
from .config import PlatformConfig, load_config
from .domain import AgreementLevel, Annotator, SurgicalApproach, VideoState
from .evaluation import (
    MetricsReport,
    VariantSplitDef,
    evaluate_submission,
    leaderboard,
    read_predictions,
    robustness_scatter,
)
from .fusion import (
    dataset_stats,
    read_clip_records,
    read_fused_labels,
    write_fused_labels,
)
from .orchestrator import JsonlNotifier, Orchestrator
from .simulator import SimConfig, generate_pool, save_pool
from .util import parse_utc
from .videoflow import (
    ChainClosed,
    DuplicateRater,
    iter_screening_log,
    read_intake_manifest,
    screen,
    write_intake_manifest,
    write_screening_log,
)


def _load_platform_config(args: argparse.Namespace) -> PlatformConfig:
    return load_config(getattr(args, "config", None))


def _open_store(args: argparse.Namespace) -> Orchestrator:
    store = Path(args.store)
    store.mkdir(parents=True, exist_ok=True)
    config = _load_platform_config(args)
    notifier = JsonlNotifier(store / "notifications.jsonl")
    return Orchestrator.load(store, config=config, notifier=notifier)


def _close_store(orch: Orchestrator) -> None:
    # Pending effects (reminders, the next tick) live outside the event log,
    # so a command that may have queued some must snapshot before exiting.
    orch.write_snapshot()


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.config:
        raw = yaml.safe_load(Path(args.config).read_text(encoding="utf-8")) or {}
        config = SimConfig.from_dict(raw)
    else:
        config = SimConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.videos is not None:
        config = replace(config, n_videos=args.videos)
    if args.annotators is not None:
        config = replace(config, n_annotators=args.annotators)
    if args.dropout is not None:
        config = replace(config, dropout_rate=args.dropout)

    pool = generate_pool(config)
    out = Path(args.out)
    paths = save_pool(pool, out)
    write_intake_manifest(pool.videos, out / "intake_manifest.jsonl")
    write_screening_log(pool.videos, out / "screening_log.jsonl")
    # The evaluation input contract, so `evaluate --fused` can point straight
    # at a simulated pool (fused_clips.jsonl is the clip-per-line pool dump).
    write_fused_labels(
        (pool.fused[cid] for cid in sorted(pool.fused)), out / "fused_labels.jsonl"
    )

    funnel = pool.funnel()
    achieved = [0, 0, 0]
    for latent in pool.latents.values():
        for i, verdict in enumerate(latent.achieved):
            achieved[i] += int(verdict)
    print(f"pool written to {out}")
    print(f"  videos      {len(pool.videos)} ({config.n_videos} requested)")
    print(f"  annotators  {len(pool.annotators)} ({len(pool.active_annotator_ids())} active)")
    print(f"  assessments {sum(len(group) for group in pool.assessments.values())}")
    print(f"  positives   {tuple(achieved)} of {len(pool.latents)} videos per criterion")
    print(f"  funnel      {funnel.contacted} contacted -> {funnel.qualified} active")
    for name in sorted(paths):
        print(f"  file        {paths[name]}")
    print(f"  file        {out / 'intake_manifest.jsonl'}")
    print(f"  file        {out / 'screening_log.jsonl'}")
    print(f"  file        {out / 'fused_labels.jsonl'}")
    return 0


# ---------------------------------------------------------------------------
# intake / screen


def cmd_intake(args: argparse.Namespace) -> int:
    orch = _open_store(args)
    cases = read_intake_manifest(args.manifest)
    ingested = 0
    skipped = 0
    for case in cases:
        if case.case_id in orch.state.videos:
            skipped += 1
            continue
        orch.intake_case(case)
        orch.start_screening(case.case_id)
        ingested += 1
    print(f"ingested {ingested} cases into {args.store}" + (f" ({skipped} already present)" if skipped else ""))
    if args.roster:
        registered = 0
        with open(args.roster, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                annotator = Annotator.from_dict(json.loads(line))
                if annotator.annotator_id not in orch.state.annotators:
                    orch.register_annotator(annotator)
                    registered += 1
        print(f"registered {registered} annotators ({len(orch.active_annotator_ids())} active)")
    _close_store(orch)
    return 0


def _screen_from_log(orch: Orchestrator, path: str) -> int:
    applied = 0
    skipped = 0
    for case_id, verdict in iter_screening_log(path):
        try:
            orch.submit_screening_verdict(case_id, verdict)
            applied += 1
        except (ChainClosed, DuplicateRater):
            skipped += 1
    print(f"applied {applied} verdicts" + (f" ({skipped} skipped, chain closed or duplicate rater)" if skipped else ""))
    return 0


def cmd_screen(args: argparse.Namespace) -> int:
    orch = _open_store(args)
    if args.log:
        result = _screen_from_log(orch, args.log)
    else:
        if not args.case or not args.rater:
            print("screen: --case and --rater are required without --log", file=sys.stderr)
            return 2
        case = orch.state.videos.get(args.case)
        if case is None:
            print(f"screen: unknown case {args.case!r}", file=sys.stderr)
            return 2
        verdict = screen(
            args.rater,
            case.duration_s,
            clipping_timestamp=args.timestamp,
            used_ioc=args.ioc,
            used_icg=args.icg,
            approach=SurgicalApproach(args.approach),
            is_cholecystectomy=not args.not_cholecystectomy,
            bailout=args.bailout,
            window_obscured=args.obscured,
            needs_blur=args.needs_blur,
        )
        orch.submit_screening_verdict(args.case, verdict)
        updated = orch.state.videos[args.case]
        print(f"{updated.case_id}: {updated.state.value} after {len(updated.preannotation_chain)} verdicts")
        result = 0

    # Qualified cases are ready for clipping; cut their windows right away so
    # the scheduler can see them.
    extracted = 0
    for case_id, case in sorted(orch.state.videos.items()):
        if case.state is VideoState.QUALIFIED:
            orch.extract_clip(case_id)
            extracted += 1
    if extracted:
        print(f"extracted {extracted} clips")
    _close_store(orch)
    return result


# ---------------------------------------------------------------------------
# schedule / fuse


def cmd_schedule_tick(args: argparse.Namespace) -> int:
    orch = _open_store(args)
    now = parse_utc(args.now) if args.now else None
    batch = orch.run_tick(now=now, seed=args.seed)
    executed = orch.run_due_effects(now)
    by_annotator = batch.by_annotator()
    print(f"tick {batch.tick_id}: {len(batch.assignments)} assignments to {len(by_annotator)} annotators")
    for annotator_id in sorted(by_annotator):
        print(f"  {annotator_id}: {len(by_annotator[annotator_id])} clips")
    if executed:
        print(f"executed {len(executed)} due effects")
    histogram = orch.state.coverage.coverage_histogram()
    parts = ", ".join(f"{count} clips at {n}/3" for n, count in sorted(histogram.items()))
    print(f"coverage: {parts or 'no clips yet'}")
    _close_store(orch)
    return 0


def cmd_fuse(args: argparse.Namespace) -> int:
    orch = _open_store(args)
    if args.clip:
        fused = orch.fuse_clip(args.clip)
        full = sum(1 for row in fused.agreement for cell in row if cell is AgreementLevel.FULL)
        total = len(fused.agreement) * 3
        print(
            f"{fused.clip_id}: video level {fused.video_level}, "
            f"{full}/{total} frame cells in full agreement"
        )
        _close_store(orch)
        return 0
    done = 0
    for clip_id in sorted(orch.state.coverage.fully_annotated()):
        if clip_id not in orch.state.fused:
            orch.fuse_clip(clip_id)
            done += 1
    print(f"fused {done} clips ({len(orch.state.fused)} total)")
    _close_store(orch)
    return 0


# ---------------------------------------------------------------------------
# evaluate / leaderboard


def cmd_evaluate(args: argparse.Namespace) -> int:
    submission = read_predictions(args.predictions)
    fused = read_fused_labels(args.fused)
    records = read_clip_records(args.records)
    split_defs = None
    if args.splits:
        raw = json.loads(Path(args.splits).read_text(encoding="utf-8"))
        split_defs = [VariantSplitDef.from_dict(d) for d in raw]
    report = evaluate_submission(submission, fused, records, split_defs=split_defs)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"metrics_{report.team_id}.json"
    path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    drs = f"{100 * report.drs_mean:.2f}%" if report.drs_mean is not None else "n/a"
    print(
        f"{report.team_id}: mAP {100 * report.map_result.mean:.2f}%  "
        f"Brier {report.brier_result.mean:.3f}  DRS {drs}"
    )
    print(f"metrics written to {path}")
    return 0


def cmd_leaderboard(args: argparse.Namespace) -> int:
    reports = []
    for path in args.metrics:
        reports.append(MetricsReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8"))))
    rows = leaderboard(reports)
    variant_scores = {
        r.team_id: {
            split: mr.mean
            for split, mr in r.variant_map.items()
            if mr.mean is not None
        }
        for r in reports
    }
    scatter = robustness_scatter(variant_scores) if any(variant_scores.values()) else None
    paths = reporting.write_leaderboard_report(rows, args.out, scatter)
    print(f"{'rank':>4}  {'team':<16} {'detect':>6} {'calib':>6} {'robust':>6}")
    for row in rows:
        print(
            f"{row.overall_rank:>4}  {row.team_id:<16} {row.rank_detection:>6} "
            f"{row.rank_calibration:>6} {row.rank_robustness:>6}"
        )
    for name in sorted(paths):
        print(f"  file  {paths[name]}")
    return 0


# ---------------------------------------------------------------------------
# report / serve / replay


def cmd_report(args: argparse.Namespace) -> int:
    orch = _open_store(args)
    out = Path(args.out)
    paths = dict(reporting.write_funnel_report(orch.funnel(), out))
    paths.update(reporting.write_coverage_report(orch.state.coverage.coverage_histogram(), out))
    records = orch.clip_records()
    if records and orch.state.fused:
        stats = dataset_stats(records, orch.state.fused)
        paths.update(reporting.write_dataset_report(stats, out))
    for name in sorted(paths):
        print(f"  file  {paths[name]}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    orch = _open_store(args)
    app = create_app(orch, api_token=args.token)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    config = _load_platform_config(args)
    orch = Orchestrator.load(args.store, config=config)
    state = orch.state
    case_states: dict[str, int] = {}
    for case in state.videos.values():
        case_states[case.state.value] = case_states.get(case.state.value, 0) + 1
    print(f"events   {len(orch.log)}")
    print(f"videos   {len(state.videos)}" + (f" ({', '.join(f'{v} {k}' for k, v in sorted(case_states.items()))})" if case_states else ""))
    print(f"clips    {len(state.clips)} extracted, {len(state.fused)} fused")
    print(f"effects  {len(orch.effects)} queued")
    print(orch.funnel().as_text())
    if args.write_snapshot:
        path = orch.write_snapshot()
        print(f"snapshot written to {path}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvsops", description=__doc__.split("\n", 1)[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic annotated pool")
    p.add_argument("--config", help="simulation config file (YAML or JSON)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--videos", type=int, default=None)
    p.add_argument("--annotators", type=int, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("intake", help="ingest an intake manifest into a store")
    p.add_argument("--manifest", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--config")
    p.add_argument("--roster", help="annotator JSONL file to register alongside the cases")
    p.set_defaults(func=cmd_intake)

    p = sub.add_parser("screen", help="record screening verdicts")
    p.add_argument("--store", required=True)
    p.add_argument("--config")
    p.add_argument("--log", help="replay a screening log file instead of a single verdict")
    p.add_argument("--case")
    p.add_argument("--rater")
    p.add_argument("--timestamp", type=float, default=None, help="clipping timestamp in seconds")
    p.add_argument("--approach", choices=[a.value for a in SurgicalApproach], default="LAPAROSCOPIC")
    p.add_argument("--ioc", action="store_true")
    p.add_argument("--icg", action="store_true")
    p.add_argument("--not-cholecystectomy", action="store_true")
    p.add_argument("--bailout", action="store_true")
    p.add_argument("--obscured", action="store_true")
    p.add_argument("--needs-blur", action="store_true")
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("schedule", help="scheduling operations")
    schedule_sub = p.add_subparsers(dest="schedule_command", required=True)
    tick = schedule_sub.add_parser("tick", help="run one assignment tick")
    tick.add_argument("--store", required=True)
    tick.add_argument("--config")
    tick.add_argument("--now", help="tick time, ISO-8601 UTC")
    tick.add_argument("--seed", type=int, default=None)
    tick.set_defaults(func=cmd_schedule_tick)

    p = sub.add_parser("fuse", help="fuse fully-annotated clips")
    p.add_argument("--store", required=True)
    p.add_argument("--config")
    p.add_argument("--clip", help="fuse one clip instead of all eligible ones")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("evaluate", help="score one team's predictions")
    p.add_argument("--predictions", required=True)
    p.add_argument("--fused", required=True, help="fused labels file")
    p.add_argument("--records", required=True, help="clip records file")
    p.add_argument("--splits", help="JSON list of variant split definitions")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("leaderboard", help="rank metrics files and render figures")
    p.add_argument("metrics", nargs="+", help="metrics JSON files from `evaluate`")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_leaderboard)

    p = sub.add_parser("report", help="render funnel, coverage and dataset figures")
    p.add_argument("--store", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="expose a store over HTTP")
    p.add_argument("--store", required=True)
    p.add_argument("--config")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8400)
    p.add_argument("--token", default=None, help="bearer token required on every route")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="rebuild state from the event log")
    p.add_argument("--store", required=True)
    p.add_argument("--config")
    p.add_argument("--write-snapshot", action="store_true")
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

"""Rendering run summaries to files: figures plus delimited/JSON outputs.

Every ``write_*`` function drops a small bundle into a directory so a report
run is self-contained: the figure a human looks at and, next to it, the same
numbers in machine-readable form. The Agg backend is forced because reports
render on headless machines.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .annotators import FunnelReport
from .evaluation import (
    LeaderboardRow,
    ScatterPoint,
    write_leaderboard_csv,
    write_leaderboard_json,
)
from .fusion import SplitStats
from .util import round_half_up

FIG_DPI = 150


def render_funnel(report: FunnelReport, path: str | Path) -> Path:
    """Horizontal recruitment funnel, widest stage on top."""
    stages = [
        ("contacted", report.contacted),
        ("eligible", report.eligible),
        ("exam taken", report.exam_taken),
        ("exam passed", report.passed),
        ("active", report.qualified),
    ]
    fig, ax = plt.subplots(figsize=(6, 3.2))
    names = [name for name, _ in stages][::-1]
    counts = [count for _, count in stages][::-1]
    ax.barh(names, counts, color="#4878a8")
    for y, count in enumerate(counts):
        ax.text(count, y, f" {count}", va="center", fontsize=9)
    ax.set_xlabel("annotators")
    ax.set_title(f"Recruitment funnel ({report.dropped} dropped)")
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)
    return Path(path)


def render_coverage(histogram: Mapping[int, int], path: str | Path) -> Path:
    """Bar chart of clips by completed-assessment count."""
    levels = sorted(histogram)
    counts = [histogram[level] for level in levels]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    bars = ax.bar([str(level) for level in levels], counts, color="#6aa84f")
    ax.bar_label(bars)
    ax.set_xlabel("completed assessments")
    ax.set_ylabel("clips")
    ax.set_title("Coverage progress")
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)
    return Path(path)


def render_leaderboard(rows: Sequence[LeaderboardRow], path: str | Path) -> Path:
    """Three aligned panels (detection, calibration, robustness), teams in
    overall-rank order."""
    ordered = sorted(rows, key=lambda r: (r.overall_rank, r.team_id))
    teams = [r.team_id for r in ordered]
    fig, axes = plt.subplots(1, 3, figsize=(11, 0.45 * len(teams) + 1.6), sharey=True)
    panels = [
        ("mAP (%)", [None if r.map_mean is None else 100 * r.map_mean for r in ordered], "#4878a8"),
        ("Brier (lower is better)", [r.brier_mean for r in ordered], "#c27ba0"),
        ("DRS (%)", [None if r.drs_mean is None else 100 * r.drs_mean for r in ordered], "#6aa84f"),
    ]
    ypos = list(range(len(teams)))[::-1]
    for ax, (title, values, color) in zip(axes, panels):
        shown = [0.0 if v is None else v for v in values]
        ax.barh(ypos, shown, color=color)
        ax.set_title(title, fontsize=10)
        ax.set_yticks(ypos)
        ax.set_yticklabels(teams, fontsize=8)
    fig.suptitle("Leaderboard")
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)
    return Path(path)


def render_robustness_scatter(points: Sequence[ScatterPoint], path: str | Path) -> Path:
    """Mean variant score against its spread, one dot per team."""
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    for p in points:
        ax.scatter(100 * p.mean, 100 * p.std, color="#4878a8", s=28, zorder=3)
        ax.annotate(
            p.team_id,
            (100 * p.mean, 100 * p.std),
            textcoords="offset points",
            xytext=(4, 3),
            fontsize=7,
        )
    ax.set_xlabel("mean variant mAP (%)")
    ax.set_ylabel("std across variants (%)")
    ax.set_title("Robustness across variant splits")
    ax.grid(True, linewidth=0.3, alpha=0.5)
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)
    return Path(path)


def render_dataset_stats(stats: Sequence[SplitStats], path: str | Path) -> Path:
    """Per-split video-level achievement counts, grouped by criterion."""
    fig, ax = plt.subplots(figsize=(6, 3.6))
    criteria = ("C1", "C2", "C3")
    width = 0.8 / max(len(stats), 1)
    for i, st in enumerate(stats):
        xs = [k + i * width for k in range(3)]
        ax.bar(xs, st.video_level_achieved, width=width, label=f"{st.split} (n={st.n_clips})")
    ax.set_xticks([k + width * (len(stats) - 1) / 2 for k in range(3)])
    ax.set_xticklabels(criteria)
    ax.set_ylabel("clips achieved (video level)")
    ax.set_title("Fused video-level achievement")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)
    return Path(path)


# ---------------------------------------------------------------------------
# Bundles: figure + delimited/JSON data side by side
# ---------------------------------------------------------------------------


def write_funnel_report(report: FunnelReport, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "funnel.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", "utf-8")
    text_path = out / "funnel.txt"
    text_path.write_text(report.as_text() + "\n", "utf-8")
    return {
        "funnel.json": json_path,
        "funnel.txt": text_path,
        "funnel.png": render_funnel(report, out / "funnel.png"),
    }


def write_coverage_report(
    histogram: Mapping[int, int], out_dir: str | Path
) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "coverage.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["completed_assessments", "clips"])
        for level in sorted(histogram):
            writer.writerow([level, histogram[level]])
    return {
        "coverage.csv": csv_path,
        "coverage.png": render_coverage(histogram, out / "coverage.png"),
    }


def write_leaderboard_report(
    rows: Sequence[LeaderboardRow],
    out_dir: str | Path,
    scatter: Sequence[ScatterPoint] | None = None,
) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    write_leaderboard_csv(rows, out / "leaderboard.csv")
    paths["leaderboard.csv"] = out / "leaderboard.csv"
    write_leaderboard_json(rows, out / "leaderboard.json")
    paths["leaderboard.json"] = out / "leaderboard.json"
    paths["leaderboard.png"] = render_leaderboard(rows, out / "leaderboard.png")
    if scatter is not None:
        csv_path = out / "robustness_scatter.csv"
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["team_id", "mean_pct", "std_pct"])
            for p in scatter:
                writer.writerow(
                    [
                        p.team_id,
                        f"{round_half_up(100 * p.mean, 2):.2f}",
                        f"{round_half_up(100 * p.std, 2):.2f}",
                    ]
                )
        paths["robustness_scatter.csv"] = csv_path
        paths["robustness_scatter.png"] = render_robustness_scatter(
            scatter, out / "robustness_scatter.png"
        )
    return paths


def write_dataset_report(
    stats: Sequence[SplitStats], out_dir: str | Path
) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "dataset_stats.json"
    json_path.write_text(
        json.dumps([st.to_dict() for st in stats], indent=2) + "\n", "utf-8"
    )
    return {
        "dataset_stats.json": json_path,
        "dataset_stats.png": render_dataset_stats(stats, out / "dataset_stats.png"),
    }

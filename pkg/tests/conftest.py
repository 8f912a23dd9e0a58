from __future__ import annotations

import json
import random
import sys
from pathlib import Path

import pytest

from cvsops.domain import Assessment
from cvsops.fusion import ANNOTATED_FRAME_INDICES
from cvsops.simulator import SimConfig, SimulatedPool, generate_pool

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def published() -> dict:
    """Golden final-leaderboard fixture of the original challenge."""
    return json.loads((DATA_DIR / "challenge_results.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def small_pool() -> SimulatedPool:
    """A 60-case fully fused pool, shared read-only by many tests."""
    return generate_pool(SimConfig(seed=424242, n_videos=60, n_annotators=8))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print the acceptance scorecard, one verdict line per criterion."""
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for line in results:
        terminalreporter.write_line(line)


def random_assessment(
    rng: random.Random, clip_id: str = "clip-x", annotator_id: str = "ann-x"
) -> Assessment:
    """An arbitrary but always-valid assessment."""
    frames = tuple(
        tuple(rng.randint(0, 1) for _ in range(3)) for _ in ANNOTATED_FRAME_INDICES
    )
    video = tuple(int(any(row[k] for row in frames)) for k in range(3))
    return Assessment(
        clip_id=clip_id,
        annotator_id=annotator_id,
        frame_labels=frames,
        confidence=rng.random(),
        video_level=video,
    )

"""Evaluation metrics: exact-match Hits@1 and web-search usage ratios."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .qa import QAExample
from .text import normalize
from .trajectory import SEARCH_TAGS, WEB_SEARCH, Trajectory, answer_items

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalReport:
    hits_at_1: float
    web_search_ratio: float
    n_questions: int


def hits_at_1(trajs: Sequence[Trajectory], qa: Sequence[QAExample]) -> float:
    """Fraction of questions whose first predicted answer exactly matches
    any gold alias after normalization. Questions without a trajectory count
    as misses (with a warning)."""
    if not qa:
        raise ValueError("hits_at_1 needs at least one question")
    by_id = {t.question_id: t for t in trajs}
    hits = 0
    for ex in qa:
        traj = by_id.get(ex.id)
        if traj is None:
            logger.warning("no trajectory for question %s; counted as a miss", ex.id)
            continue
        items = answer_items(traj)
        if not items:
            continue
        first = items[0]
        if any(first == normalize(alias) for aliases in ex.answers for alias in aliases):
            hits += 1
    return hits / len(qa)


def web_search_ratio(trajs: Sequence[Trajectory]) -> float:
    """Fraction of trajectories containing at least one web_search block."""
    if not trajs:
        raise ValueError("web_search_ratio needs at least one trajectory")
    with_web = sum(1 for t in trajs if t.blocks(WEB_SEARCH))
    return with_web / len(trajs)


def web_calls_per_tool_call(trajs: Sequence[Trajectory]) -> float:
    """Web search blocks as a fraction of all tool-call blocks; the
    per-operation variant of the web usage ratio."""
    total = sum(1 for t in trajs for s in t.steps if s.tag in SEARCH_TAGS)
    if total == 0:
        return 0.0
    web = sum(1 for t in trajs for s in t.steps if s.tag == WEB_SEARCH)
    return web / total


def build_report(trajs: Sequence[Trajectory], qa: Sequence[QAExample]) -> dict:
    """Single-document eval report with both web-usage variants."""
    report = EvalReport(
        hits_at_1=hits_at_1(trajs, qa),
        web_search_ratio=web_search_ratio(trajs),
        n_questions=len(qa),
    )
    return {
        "hits_at_1": report.hits_at_1,
        "web_search_ratio": report.web_search_ratio,
        "web_calls_per_tool_call": web_calls_per_tool_call(trajs),
        "n_questions": report.n_questions,
    }


def write_report(report: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")

"""Multi-signal reward scoring and group-relative advantages.

Scoring combines an outcome reward (answer F1 gated by format validity, with
a 0.1 floor for well-formed attempts) with retrieval signals computed over
the concatenated graph and web information blocks, and an overall reward
that penalizes web search when the graph was complete, or its absence when
the graph was not. All operations are pure; batches can be scored in
parallel without coordination.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Set

from .kg import COVERAGE_CKG, COVERAGE_IKG
from .text import contains_normalized, normalize
from .trajectory import (
    NEIGHBOR_INFORMATION,
    WEB_INFORMATION,
    Trajectory,
    answer_items,
    validate_format,
)

ADVANTAGE_EPS = 1e-8
DEFAULT_GROUP_SIZE = 8


@dataclass(frozen=True)
class RewardBreakdown:
    """All reward components for one trajectory, plus the concatenated
    retrieval views they were computed from."""

    format_ok: bool
    r_ans: float
    r_acc: float
    r_graph: int
    r_web: int
    r_over: float
    o_graph: str
    o_web: str


def answer_f1(pred: Set[str], gold: Sequence[Sequence[str]]) -> float:
    """Set F1 between predictions and gold answers, where a prediction
    matches a gold answer when it equals any of its aliases after
    normalization. Empty predictions or empty gold score 0."""
    if not pred or not gold:
        return 0.0
    pred_norm = {normalize(p) for p in pred} - {""}
    if not pred_norm:
        return 0.0
    gold_norm = [{normalize(a) for a in aliases} - {""} for aliases in gold]
    matched_preds = sum(1 for p in pred_norm if any(p in aliases for aliases in gold_norm))
    matched_golds = sum(1 for aliases in gold_norm if aliases & pred_norm)
    precision = matched_preds / len(pred_norm)
    recall = matched_golds / len(gold_norm)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def accuracy_reward(traj: Trajectory, gold: Sequence[Sequence[str]]) -> tuple[bool, float, float]:
    """(format_ok, r_ans, accuracy reward). A malformed trajectory scores 0;
    a well-formed one scores max(0.1, r_ans), so honest format compliance is
    never worth less than 0.1."""
    format_ok = validate_format(traj).valid
    r_ans = answer_f1(set(answer_items(traj)), gold)
    r_acc = max(0.1, r_ans) if format_ok else 0.0
    return format_ok, r_ans, r_acc


def _concat_info(traj: Trajectory, tag: str) -> str:
    return "\n".join(s.content for s in traj.steps if s.tag == tag)


def _covers_all_gold(text: str, gold: Sequence[Sequence[str]]) -> int:
    if not gold or not text:
        return 0
    ok = all(any(contains_normalized(text, alias) for alias in aliases) for aliases in gold)
    return 1 if ok else 0


def graph_reward(traj: Trajectory, gold: Sequence[Sequence[str]]) -> int:
    """1 iff every gold answer appears (some alias, normalized substring) in
    the concatenation of all neighbor_information contents, else 0."""
    return _covers_all_gold(_concat_info(traj, NEIGHBOR_INFORMATION), gold)


def web_reward(traj: Trajectory, gold: Sequence[Sequence[str]]) -> int:
    """Same containment test over the concatenated web_information contents."""
    return _covers_all_gold(_concat_info(traj, WEB_INFORMATION), gold)


def overall_reward(r_acc: float, r_graph: int, r_web: int, coverage: str) -> float:
    """Combine the component rewards under the question's coverage label.

    Case precedence (accuracy > penalty > shaping > zero): a positive
    accuracy reward passes through untouched; otherwise web use on a
    complete graph, or no web use on an incomplete one, costs -0.1; otherwise
    any successful retrieval earns 0.1; otherwise 0.
    """
    if coverage not in (COVERAGE_CKG, COVERAGE_IKG):
        raise ValueError(f"coverage label must be {COVERAGE_CKG!r} or {COVERAGE_IKG!r}, got {coverage!r}")
    if r_acc > 0:
        return r_acc
    if (coverage == COVERAGE_CKG and r_web > 0) or (coverage == COVERAGE_IKG and r_web == 0):
        return -0.1
    if r_graph > 0 or r_web > 0:
        return 0.1
    return 0.0


def score_trajectory(traj: Trajectory, gold: Sequence[Sequence[str]], coverage: str) -> RewardBreakdown:
    """Full reward breakdown for one trajectory."""
    format_ok, r_ans, r_acc = accuracy_reward(traj, gold)
    r_graph = graph_reward(traj, gold)
    r_web = web_reward(traj, gold)
    r_over = overall_reward(r_acc, r_graph, r_web, coverage)
    return RewardBreakdown(
        format_ok=format_ok,
        r_ans=r_ans,
        r_acc=r_acc,
        r_graph=r_graph,
        r_web=r_web,
        r_over=r_over,
        o_graph=_concat_info(traj, NEIGHBOR_INFORMATION),
        o_web=_concat_info(traj, WEB_INFORMATION),
    )


def group_advantages(rewards: Sequence[float]) -> list[float]:
    """Group-relative advantages: (r - mean) / (population std + eps).
    All-equal groups yield exactly zero advantages."""
    if not rewards:
        raise ValueError("cannot compute advantages of an empty reward group")
    mean = sum(rewards) / len(rewards)
    std = math.sqrt(sum((r - mean) ** 2 for r in rewards) / len(rewards))
    return [(r - mean) / (std + ADVANTAGE_EPS) for r in rewards]


@dataclass(frozen=True)
class AdvantageGroup:
    """Rewards and advantages for the rollouts of one question."""

    rewards: tuple[float, ...]
    advantages: tuple[float, ...]
    group_size: int = DEFAULT_GROUP_SIZE

    @classmethod
    def from_rewards(cls, rewards: Sequence[float], group_size: int = DEFAULT_GROUP_SIZE) -> "AdvantageGroup":
        return cls(tuple(rewards), tuple(group_advantages(rewards)), group_size)


# -- score / advantage files -------------------------------------------------

def score_record(question_id: str, breakdown: RewardBreakdown, coverage: str) -> dict:
    return {
        "id": question_id,
        "format_ok": breakdown.format_ok,
        "r_ans": breakdown.r_ans,
        "R_acc": breakdown.r_acc,
        "R_graph": breakdown.r_graph,
        "R_web": breakdown.r_web,
        "R_over": breakdown.r_over,
        "coverage": coverage,
    }


def write_scores(records: Iterable[dict], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_scores(path: str | Path) -> list[dict]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out


def group_score_records(records: Sequence[dict], group_size: int = DEFAULT_GROUP_SIZE) -> list[dict]:
    """Group score records into advantage records: consecutive records with
    the same question id form a group, chunked to at most ``group_size``
    rollouts per group."""
    if group_size < 1:
        raise ValueError(f"group size must be >= 1, got {group_size}")
    groups: list[tuple[str, list[dict]]] = []
    for rec in records:
        if groups and groups[-1][0] == rec["id"] and len(groups[-1][1]) < group_size:
            groups[-1][1].append(rec)
        else:
            groups.append((rec["id"], [rec]))
    out = []
    for qid, members in groups:
        rewards = [float(m["R_over"]) for m in members]
        out.append({
            "id": qid,
            "group": [m["id"] for m in members],
            "rewards": rewards,
            "advantages": group_advantages(rewards),
        })
    return out

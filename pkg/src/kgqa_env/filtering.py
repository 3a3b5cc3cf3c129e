"""Two-stage trajectory filtering for SFT dataset construction.

A trajectory is kept only when it passes every check: tag format validity,
an exactly-correct answer, coverage-appropriate retrieval behavior (no web
search and the gold answer present in graph retrievals when the graph was
complete; a web search whose retrievals contain the gold answer when it was
not), and a plan quality judgment.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import requests

from .kg import COVERAGE_CKG, COVERAGE_IKG, display
from .plan import Ans, PlanError, expr_dependencies, parse_plan
from .qa import QAExample
from .rewards import answer_f1, graph_reward, web_reward
from .rollout import build_prompt
from .text import normalize
from .trajectory import (
    PLAN,
    WEB_SEARCH,
    Trajectory,
    answer_items,
    retrieval_mask,
    validate_format,
)

FORMAT = "FORMAT"
ANSWER_CHECK = "ANSWER"
RETRIEVAL_CKG_WEB_PRESENT = "RETRIEVAL_CKG_WEB_PRESENT"
RETRIEVAL_CKG_GRAPH_MISS = "RETRIEVAL_CKG_GRAPH_MISS"
RETRIEVAL_IKG_WEB_ABSENT = "RETRIEVAL_IKG_WEB_ABSENT"
RETRIEVAL_IKG_WEB_MISS = "RETRIEVAL_IKG_WEB_MISS"
PLAN_JUDGE = "PLAN_JUDGE"

ALL_CHECKS = (
    FORMAT,
    ANSWER_CHECK,
    RETRIEVAL_CKG_WEB_PRESENT,
    RETRIEVAL_CKG_GRAPH_MISS,
    RETRIEVAL_IKG_WEB_ABSENT,
    RETRIEVAL_IKG_WEB_MISS,
    PLAN_JUDGE,
)


class JudgeError(RuntimeError):
    """Judge transport/protocol failure; the caller may retry. A failing
    judge never silently keeps a trajectory."""


@dataclass(frozen=True)
class FilterVerdict:
    keep: bool
    failed_checks: tuple[str, ...]


class Judge(ABC):
    """Scores a plan 1 (reasonable) or 0 (unreasonable) for a question."""

    @abstractmethod
    def score(self, example: QAExample, plan_text: str) -> int:
        raise NotImplementedError


class RuleJudge(Judge):
    """Dependency-free plan judge: the plan must parse, every topic entity of
    the question must appear as some retrieval head, and the final
    sub-question must be the sink (referenced by no other)."""

    def score(self, example: QAExample, plan_text: str) -> int:
        try:
            plan = parse_plan(plan_text)
        except PlanError:
            return 0
        heads = {
            normalize(sq.expr.head)
            for sq in plan.sub_questions
            if isinstance(sq.expr, Ans) and not sq.expr.head_is_ref
        }
        for topic in example.topic_entities:
            if normalize(display(topic)) not in heads:
                return 0
        final_id = plan.sub_questions[-1].id
        for sq in plan.sub_questions[:-1]:
            if final_id in expr_dependencies(sq.expr):
                return 0
        return 1


class RemoteJudge(Judge):
    """POST {"question": text, "plan": text} -> {"score": 0|1}."""

    def __init__(self, url: str, timeout: float = 60.0):
        self.url = url
        self.timeout = timeout

    def score(self, example: QAExample, plan_text: str) -> int:
        try:
            resp = requests.post(
                self.url,
                json={"question": example.question, "plan": plan_text},
                timeout=self.timeout,
            )
            resp.raise_for_status()
            score = resp.json()["score"]
        except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
            raise JudgeError(f"judge request to {self.url} failed: {exc}") from exc
        if score not in (0, 1):
            raise JudgeError(f"judge returned malformed score {score!r}, expected 0 or 1")
        return int(score)


def judge_plan(example: QAExample, plan_text: str, judge: Judge) -> int:
    """Score a plan through the given judge, validating the {0, 1} contract."""
    score = judge.score(example, plan_text)
    if score not in (0, 1):
        raise JudgeError(f"judge returned malformed score {score!r}, expected 0 or 1")
    return score


def filter_trajectory(
    traj: Trajectory,
    example: QAExample,
    coverage: str,
    judge: Judge,
    answer_threshold: float = 1.0,
) -> FilterVerdict:
    """Run all filter checks and collect every failure. ``answer_threshold``
    defaults to an exact answer-set match (F1 = 1); lower it to admit
    partially correct answers.

    Under IKG, a missing web search fails RETRIEVAL_IKG_WEB_ABSENT while
    RETRIEVAL_IKG_WEB_MISS fires only when web retrievals exist but lack the
    gold answer, so the two codes identify distinct defects.
    """
    if coverage not in (COVERAGE_CKG, COVERAGE_IKG):
        raise ValueError(f"coverage label must be {COVERAGE_CKG!r} or {COVERAGE_IKG!r}, got {coverage!r}")
    failed: list[str] = []
    if not validate_format(traj).valid:
        failed.append(FORMAT)
    if answer_f1(set(answer_items(traj)), example.answers) < answer_threshold:
        failed.append(ANSWER_CHECK)
    has_web = bool(traj.blocks(WEB_SEARCH))
    if coverage == COVERAGE_CKG:
        if has_web:
            failed.append(RETRIEVAL_CKG_WEB_PRESENT)
        if graph_reward(traj, example.answers) == 0:
            failed.append(RETRIEVAL_CKG_GRAPH_MISS)
    else:
        if not has_web:
            failed.append(RETRIEVAL_IKG_WEB_ABSENT)
        elif web_reward(traj, example.answers) == 0:
            failed.append(RETRIEVAL_IKG_WEB_MISS)
    plans = traj.blocks(PLAN)
    if not plans or judge_plan(example, plans[0].content, judge) == 0:
        failed.append(PLAN_JUDGE)
    return FilterVerdict(keep=not failed, failed_checks=tuple(failed))


def sft_record(example: QAExample, traj: Trajectory) -> dict:
    """Training record for a kept trajectory: the prompt, the full tagged
    completion, and the char spans an external trainer must exclude from the
    loss (tool-injected text the policy did not generate)."""
    return {
        "prompt": build_prompt(example),
        "completion": traj.raw,
        "masked_spans": [list(span) for span in retrieval_mask(traj)],
    }


def write_sft(records: Iterable[dict], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

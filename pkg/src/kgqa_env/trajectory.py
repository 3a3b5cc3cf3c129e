"""Tag-structured trajectory grammar: parse, validate, render, and mask.

A trajectory is a flat sequence of ``<tag>content</tag>`` blocks drawn from a
closed vocabulary; no nesting, no attributes. Text found outside any block is
kept as implicit think content by default (LLM output drifts), or rejected in
strict mode. All operations here are pure functions over immutable values.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .text import normalize

THINK = "think"
PLAN = "plan"
RELATION_SEARCH = "relation_search"
RELATION_INFORMATION = "relation_information"
NEIGHBOR_SEARCH = "neighbor_search"
NEIGHBOR_INFORMATION = "neighbor_information"
WEB_SEARCH = "web_search"
WEB_INFORMATION = "web_information"
ANSWER = "answer"

#: Closed tag vocabulary: the action set plus the three injected information tags.
TAGS = frozenset({
    THINK, PLAN, RELATION_SEARCH, RELATION_INFORMATION, NEIGHBOR_SEARCH,
    NEIGHBOR_INFORMATION, WEB_SEARCH, WEB_INFORMATION, ANSWER,
})
SEARCH_TAGS = frozenset({RELATION_SEARCH, NEIGHBOR_SEARCH, WEB_SEARCH})
INFO_TAGS = frozenset({RELATION_INFORMATION, NEIGHBOR_INFORMATION, WEB_INFORMATION})
#: Search tag -> the information tag the engine injects for it.
INFO_FOR = {
    RELATION_SEARCH: RELATION_INFORMATION,
    NEIGHBOR_SEARCH: NEIGHBOR_INFORMATION,
    WEB_SEARCH: WEB_INFORMATION,
}
SEARCH_FOR = {info: search for search, info in INFO_FOR.items()}

# Format violation codes
PLAN_COUNT = "PLAN_COUNT"
PLAN_NOT_FIRST_ACTION = "PLAN_NOT_FIRST_ACTION"
ANSWER_COUNT = "ANSWER_COUNT"
ORPHAN_INFO = "ORPHAN_INFO"

_TAG_RE = re.compile(r"</?([A-Za-z_][A-Za-z0-9_]*)>")


class ParseError(ValueError):
    """Trajectory text violating the tag grammar; carries a char offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class Step(NamedTuple):
    """One tagged block. ``span`` is the (start, end) of the content between
    the delimiters in the source text (None for hand-built steps); implicit
    steps are bare text adopted as think content and carry no delimiters."""

    tag: str
    content: str
    span: tuple[int, int] | None = None
    implicit: bool = False


class Violation(NamedTuple):
    code: str
    message: str
    offset: int


@dataclass(frozen=True)
class FormatReport:
    valid: bool
    violations: tuple[Violation, ...]


@dataclass(frozen=True)
class Trajectory:
    question_id: str
    steps: tuple[Step, ...]
    raw: str

    @property
    def step_signature(self) -> list[tuple[str, str]]:
        """(tag, content) pairs; the identity used by round-trip checks."""
        return [(s.tag, s.content) for s in self.steps]

    def blocks(self, tag: str) -> list[Step]:
        return [s for s in self.steps if s.tag == tag]


def parse_trajectory(text: str, question_id: str = "", strict: bool = False) -> Trajectory:
    """Segment tagged text into steps, in source order.

    Bare text between blocks becomes an implicit think step (skipped when
    whitespace-only); in strict mode it is a parse error instead. Unknown
    tags, nested tags, unclosed tags and stray closing tags all raise
    :class:`ParseError` with the offending offset.
    """
    steps: list[Step] = []
    pos = 0
    open_tag: str | None = None
    content_start = 0
    open_offset = 0

    def adopt_bare(chunk: str, start: int) -> None:
        if not chunk.strip():
            return
        if strict:
            raise ParseError("text outside tag blocks is not allowed in strict mode", start)
        stripped = chunk.strip()
        lead = chunk.index(stripped[0])
        steps.append(Step(THINK, stripped, (start + lead, start + lead + len(stripped)), implicit=True))

    for m in _TAG_RE.finditer(text):
        name = m.group(1)
        closing = m.group(0).startswith("</")
        if open_tag is None:
            if closing:
                raise ParseError(f"closing tag </{name}> without matching opening tag", m.start())
            if name not in TAGS:
                raise ParseError(f"unknown tag <{name}>: only the defined tag vocabulary is allowed", m.start())
            adopt_bare(text[pos:m.start()], pos)
            open_tag = name
            open_offset = m.start()
            content_start = m.end()
        else:
            if not closing:
                raise ParseError(f"nested tag <{name}> inside <{open_tag}> block", m.start())
            if name != open_tag:
                raise ParseError(f"closing tag </{name}> does not match open <{open_tag}> block", m.start())
            steps.append(Step(open_tag, text[content_start:m.start()], (content_start, m.start())))
            open_tag = None
            pos = m.end()
    if open_tag is not None:
        raise ParseError(f"unclosed <{open_tag}> block", open_offset)
    adopt_bare(text[pos:], pos)
    return Trajectory(question_id, tuple(steps), text)


def render_trajectory(traj: Trajectory) -> str:
    """Deterministic serialization; parsing the output yields step-equal
    steps. Implicit think steps render as bare text, so render-after-parse
    reproduces the source up to whitespace."""
    pieces = [s.content if s.implicit else f"<{s.tag}>{s.content}</{s.tag}>" for s in traj.steps]
    return "\n".join(pieces)


def validate_format(traj: Trajectory) -> FormatReport:
    """Check the single-plan / plan-first / single-trailing-answer /
    search-info pairing rules. The resulting flag gates the accuracy reward."""
    violations: list[Violation] = []
    steps = traj.steps

    def offset(step: Step) -> int:
        return step.span[0] if step.span else 0

    plan_idx = [i for i, s in enumerate(steps) if s.tag == PLAN]
    if len(plan_idx) != 1:
        at = steps[plan_idx[1]] if len(plan_idx) > 1 else (steps[0] if steps else None)
        violations.append(Violation(
            PLAN_COUNT,
            f"expected exactly one plan block, found {len(plan_idx)}",
            offset(at) if at else 0,
        ))
    if plan_idx:
        first_plan = plan_idx[0]
        for i, s in enumerate(steps[:first_plan]):
            if s.tag in SEARCH_TAGS:
                violations.append(Violation(
                    PLAN_NOT_FIRST_ACTION,
                    f"search block <{s.tag}> precedes the plan block",
                    offset(s),
                ))
                break
    answer_idx = [i for i, s in enumerate(steps) if s.tag == ANSWER]
    if len(answer_idx) != 1 or answer_idx[0] != len(steps) - 1:
        where = steps[answer_idx[0]] if answer_idx else (steps[0] if steps else None)
        violations.append(Violation(
            ANSWER_COUNT,
            f"expected a single answer block as the final step, found {len(answer_idx)}",
            offset(where) if where else 0,
        ))
    for i, s in enumerate(steps):
        if s.tag in INFO_TAGS:
            expected = SEARCH_FOR[s.tag]
            if i == 0 or steps[i - 1].tag != expected:
                violations.append(Violation(
                    ORPHAN_INFO,
                    f"<{s.tag}> block is not immediately preceded by <{expected}>",
                    offset(s),
                ))
    return FormatReport(valid=not violations, violations=tuple(violations))


def _span_with_delimiters(step: Step) -> tuple[int, int]:
    if step.span is None:
        raise ValueError("step has no source span; retrieval_mask needs a parsed trajectory")
    start, end = step.span
    if step.implicit:
        return start, end
    return start - len(step.tag) - 2, end + len(step.tag) + 3


def retrieval_mask(traj: Trajectory) -> list[tuple[int, int]]:
    """Char spans of every information block (content plus delimiters),
    disjoint and sorted. These spans are excluded from the training loss:
    the policy did not generate the retrieved text."""
    return [_span_with_delimiters(s) for s in traj.steps if s.tag in INFO_TAGS]


def answer_items(traj: Trajectory) -> list[str]:
    """Ordered, normalized answer items from the last answer block, split on
    ';' or '|'; empty when there is no answer block."""
    answers = traj.blocks(ANSWER)
    if not answers:
        return []
    items = [normalize(part) for part in re.split(r"[;|]", answers[-1].content)]
    return [it for it in items if it]


def read_trajectories(path: str | Path) -> list[Trajectory]:
    """Read a JSON-lines trajectory file ({"id", "text"}) and parse each line."""
    out: list[Trajectory] = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(parse_trajectory(rec["text"], question_id=str(rec["id"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"malformed trajectory record at line {lineno} of {path}") from exc
    return out


def write_trajectories(trajs: Iterable[Trajectory], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for t in trajs:
            fh.write(json.dumps({"id": t.question_id, "text": t.raw}, ensure_ascii=False) + "\n")


def write_masks(trajs: Iterable[Trajectory], path: str | Path) -> None:
    """Write a JSON-lines mask file ({"id", "masked_spans": [[start, end], ...]})."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for t in trajs:
            spans = [list(span) for span in retrieval_mask(t)]
            fh.write(json.dumps({"id": t.question_id, "masked_spans": spans}) + "\n")

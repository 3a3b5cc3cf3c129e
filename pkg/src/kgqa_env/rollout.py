"""Rollout engine: drive the interleaved generate-retrieve loop.

The engine repeatedly asks the policy for the next segment (text ending at a
closing action delimiter), executes search actions against the knowledge
graph or web tool, injects the matching information block, and terminates on
an answer block or when the tool-call budget runs out, at which point the
policy is directed to answer from its own knowledge.

Distinct rollouts may run concurrently: they share only the immutable graph
and a web tool that tolerates concurrent queries; policy and conversation
state are per-rollout.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

from .kg import KnowledgeGraph, SENTINEL
from .qa import QAExample
from .text import normalize
from .trajectory import (
    ANSWER,
    INFO_FOR,
    NEIGHBOR_SEARCH,
    PLAN,
    RELATION_SEARCH,
    SEARCH_TAGS,
    ParseError,
    Step,
    Trajectory,
    parse_trajectory,
)
from .web import WebTool

#: Appended verbatim to the conversation when the iteration limit is reached.
FORCE_ANSWER_DIRECTIVE = (
    "Iteration limit reached. Provide your final answer now inside "
    "<answer></answer> using your own knowledge."
)
#: In-band content of an information block for an unusable tool call.
MALFORMED_TOOL_CALL = "malformed tool call"
#: In-band content of a web_information block when the web backend fails.
WEB_UNAVAILABLE = "web tool unavailable"

#: Closing delimiters at which policy segments end.
STOP_TAGS = [f"</{t}>" for t in (PLAN, *sorted(SEARCH_TAGS), ANSWER)]
_CLOSE_TO_TAG = {f"</{t}>": t for t in (PLAN, *SEARCH_TAGS, ANSWER)}

# Tag names are spelled without angle brackets here so the full conversation
# (prompt plus generated text) stays parseable by the trajectory grammar.
PROMPT_TEMPLATE = """You answer questions by reasoning over a knowledge graph with web fallback.
Use only these XML-style tag blocks: think, plan, relation_search, neighbor_search,
web_search, answer. Emit exactly one plan block listing sub-questions as
'ID: Ans(type | relation(head, ?))' lines, combined with inter/union/negation over
earlier ids. Resolve each sub-question with a relation_search then a neighbor_search
tool call whose content is 'head | relation'. If the graph answers "{sentinel}",
issue a web_search for the same 'head | relation'. Tool results arrive in matching
relation_information / neighbor_information / web_information blocks. Finish with a
single answer block, items separated by '; '.

Question: {question}
Topic entities: {topics}
"""


class RolloutError(RuntimeError):
    """Rollout aborted; carries whatever trajectory prefix was assembled."""

    def __init__(self, message: str, partial: Trajectory | None = None):
        super().__init__(message)
        self.partial = partial


class Policy(ABC):
    """Generates trajectory segments. ``next_segment`` receives the running
    conversation (prompt plus everything generated or injected so far) and
    returns text ending at one of :data:`STOP_TAGS` or at end of output."""

    @abstractmethod
    def reset(self, example: QAExample) -> None:
        raise NotImplementedError

    @abstractmethod
    def next_segment(self, conversation: str) -> str:
        raise NotImplementedError


@dataclass
class RolloutConfig:
    max_iterations: int = 10
    top_k_relations: int = 15
    top_k_docs: int = 3
    seed: int = 0
    strict_format: bool = False


def build_prompt(example: QAExample) -> str:
    """Instruction-plus-question prompt shown to the policy (and recorded as
    the prompt field of SFT emissions)."""
    topics = ", ".join(example.topic_entities) or "none"
    return PROMPT_TEMPLATE.format(sentinel=SENTINEL, question=example.question, topics=topics)


def _cut_at_action(segment: str) -> tuple[str, str | None]:
    """Truncate a segment at the first closing action delimiter; returns the
    kept piece and the action tag that closed it (None at end of output)."""
    best: tuple[int, str] | None = None
    for close, tag in _CLOSE_TO_TAG.items():
        idx = segment.find(close)
        if idx >= 0 and (best is None or idx < best[0]):
            best = (idx + len(close), tag)
    if best is None:
        return segment, None
    return segment[: best[0]], best[1]


def dispatch_action(step: Step, kg: KnowledgeGraph, web: WebTool, cfg: RolloutConfig) -> Step:
    """Execute one search step and return its information block. Never
    raises: malformed calls and web transport failures produce in-band
    content the policy can react to."""
    if step.tag not in SEARCH_TAGS:
        raise ValueError(f"dispatch_action expects a search step, got <{step.tag}>")
    info_tag = INFO_FOR[step.tag]
    head, sep, relation = step.content.partition("|")
    head, relation = head.strip(), relation.strip()
    if not sep or not head or not relation:
        return Step(info_tag, MALFORMED_TOOL_CALL)
    if step.tag == RELATION_SEARCH:
        entity = kg.resolve_entity(head) or head
        return Step(info_tag, ", ".join(kg.relation_search(entity, relation, cfg.top_k_relations)))
    if step.tag == NEIGHBOR_SEARCH:
        entity = kg.resolve_entity(head) or head
        payload = kg.neighbor_search(entity, relation)
        content = payload if isinstance(payload, str) else "; ".join(sorted(payload))
        return Step(info_tag, content)
    query = normalize(f"{head} {relation}")
    try:
        snippets = web.search(query, cfg.top_k_docs)
    except Exception:
        return Step(info_tag, WEB_UNAVAILABLE)
    return Step(info_tag, "\n".join(snippets))


def force_final_answer(policy: Policy, conversation: str) -> Step:
    """Append the forced-answer directive, request one final segment, and
    accept only its answer block; degenerate output yields an empty answer
    (scored zero downstream)."""
    segment = policy.next_segment(conversation + "\n" + FORCE_ANSWER_DIRECTIVE + "\n")
    try:
        parsed = parse_trajectory(segment)
    except ParseError:
        return Step(ANSWER, "")
    for s in parsed.steps:
        if s.tag == ANSWER:
            return Step(ANSWER, s.content)
    return Step(ANSWER, "")


def _render_block(step: Step) -> str:
    return f"<{step.tag}>{step.content}</{step.tag}>"


def run_rollout(
    policy: Policy,
    kg: KnowledgeGraph,
    web: WebTool,
    example: QAExample,
    cfg: RolloutConfig | None = None,
) -> Trajectory:
    """Run one full question rollout and return the parsed trajectory.

    The returned trajectory contains only generated and injected blocks; the
    instruction prompt is shown to the policy but kept out of the trajectory
    text. In strict mode an unparseable policy segment aborts the rollout
    (:class:`RolloutError` carrying the partial trajectory); otherwise the
    bad segment is dropped and the policy is directed to answer immediately.
    """
    cfg = cfg or RolloutConfig()
    prompt = build_prompt(example)
    policy.reset(example)
    text = ""
    iterations = 0
    answered = False

    while True:
        segment = policy.next_segment(prompt + text)
        piece, action = _cut_at_action(segment)
        if action is None:
            # End of output without an action: keep parseable trailing text
            # (e.g. a think block) and fall through to the forced answer.
            if piece.strip():
                try:
                    parse_trajectory(text + piece, strict=cfg.strict_format)
                    text += piece
                except ParseError:
                    if cfg.strict_format:
                        raise RolloutError(
                            "policy emitted an unparseable segment",
                            partial=parse_trajectory(text, example.id),
                        ) from None
            break
        try:
            parsed = parse_trajectory(text + piece, question_id=example.id, strict=cfg.strict_format)
        except ParseError:
            if cfg.strict_format:
                raise RolloutError(
                    "policy emitted an unparseable segment",
                    partial=parse_trajectory(text, example.id),
                ) from None
            break  # drop the segment, direct an immediate answer
        text += piece
        if action == ANSWER:
            answered = True
            break
        if action == PLAN:
            continue
        info = dispatch_action(parsed.steps[-1], kg, web, cfg)
        text += "\n" + _render_block(info)
        iterations += 1
        if iterations >= cfg.max_iterations:
            break

    if not answered:
        answer = force_final_answer(policy, prompt + text)
        text += ("\n" if text else "") + _render_block(answer)
    return parse_trajectory(text, question_id=example.id)

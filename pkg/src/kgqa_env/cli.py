"""Command-line interface.

Every subcommand accepts ``--config PATH`` pointing at a key=value file whose
keys mirror the long flag names (e.g. ``max-iters=5``); explicit flags win
over config values, which win over built-in defaults. Keys a subcommand does
not know are ignored so one config file can drive a whole pipeline.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evaluate, filtering, rewards
from .kg import (
    KGError,
    load_triples,
    read_removal_log,
    sample_ikg,
    write_removal_log,
    write_triples,
)
from .policies import RemotePolicy, ScriptedOracle
from .qa import QAError, load_qa
from .rollout import RolloutConfig, RolloutError, run_rollout
from .trajectory import read_trajectories, write_masks, write_trajectories
from .web import OfflineWebTool, RemoteWebTool, WebToolError


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="random seed")
    parser.add_argument("--config", default=None, help="key=value file mirroring the flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgqa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-kg", help="load, validate and report a triple file")
    p.add_argument("--triples", required=True)
    p.add_argument("--aliases", default=None)
    p.add_argument("--out", default=None, help="write a normalized (deduplicated, sorted) TSV copy")
    _add_common(p)

    p = sub.add_parser("sample-ikg", help="derive an incomplete graph and removal log")
    p.add_argument("--triples", required=True)
    p.add_argument("--aliases", default=None)
    p.add_argument("--qa", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--out-kg", required=True)
    p.add_argument("--out-log", required=True)
    _add_common(p)

    p = sub.add_parser("rollout", help="run the generate-retrieve loop over a QA set")
    p.add_argument("--kg", required=True)
    p.add_argument("--aliases", default=None)
    p.add_argument("--qa", required=True)
    p.add_argument("--ikg-log", default=None, help="accepted for pipeline symmetry; rollouts do not read it")
    p.add_argument("--policy", choices=["scripted", "remote"], default="scripted")
    p.add_argument("--policy-url", default=None)
    p.add_argument("--web", choices=["offline", "remote"], default="offline")
    p.add_argument("--web-corpus", default=None)
    p.add_argument("--web-url", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--masks", default=None, help="also write retrieval-mask spans here")
    p.add_argument("--max-iters", type=int, default=10)
    p.add_argument("--top-k-relations", type=int, default=15)
    p.add_argument("--top-k-docs", type=int, default=3)
    p.add_argument("--strict-format", action="store_true")
    _add_common(p)

    p = sub.add_parser("score", help="score trajectories against gold answers")
    p.add_argument("--traj", required=True)
    p.add_argument("--qa", required=True)
    p.add_argument("--ikg-log", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("advantages", help="group-relative advantages from a score file")
    p.add_argument("--scores", required=True)
    p.add_argument("--group-size", type=int, default=rewards.DEFAULT_GROUP_SIZE)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("filter-sft", help="filter trajectories into an SFT training file")
    p.add_argument("--traj", required=True)
    p.add_argument("--qa", required=True)
    p.add_argument("--ikg-log", required=True)
    p.add_argument("--judge", choices=["rule", "remote"], default="rule")
    p.add_argument("--judge-url", default=None)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = sub.add_parser("eval", help="Hits@1 and web-usage report")
    p.add_argument("--traj", required=True)
    p.add_argument("--qa", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)

    return parser


def _load_config(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"malformed config file line {lineno}: {line!r}")
        values[key.strip()] = value.strip()
    return values


def _probe_argv(argv: list[str]) -> tuple[str | None, str | None]:
    """Extract the subcommand name and --config value without a full parse
    (argparse would reject missing required flags the config provides)."""
    command = None
    config = None
    for i, tok in enumerate(argv):
        if command is None and not tok.startswith("-"):
            command = tok
        if tok == "--config" and i + 1 < len(argv):
            config = argv[i + 1]
        elif tok.startswith("--config="):
            config = tok.split("=", 1)[1]
    return command, config


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Two-pass parse: pick up --config, turn its values into defaults for
    the invoked subcommand (clearing `required` on flags it covers), then
    parse the real argv on top."""
    command, config = _probe_argv(argv)
    if not config or command is None:
        return parser.parse_args(argv)
    values = _load_config(config)
    sub_actions = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    subparser = sub_actions.choices.get(command)
    if subparser is None:
        return parser.parse_args(argv)
    defaults: dict[str, object] = {}
    for action in subparser._actions:
        for opt in action.option_strings:
            key = opt.lstrip("-")
            if key in values:
                raw = values[key]
                if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                    defaults[action.dest] = raw.lower() in ("1", "true", "yes", "on")
                elif action.type is not None:
                    defaults[action.dest] = action.type(raw)
                else:
                    defaults[action.dest] = raw
                action.required = False
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def _make_web(args: argparse.Namespace):
    if args.web == "offline":
        if not args.web_corpus:
            raise WebToolError("--web offline requires --web-corpus PATH")
        return OfflineWebTool.from_path(args.web_corpus)
    if not args.web_url:
        raise WebToolError("--web remote requires --web-url URL")
    return RemoteWebTool(args.web_url)


def _make_policy(args: argparse.Namespace):
    if args.policy == "scripted":
        return ScriptedOracle()
    if not args.policy_url:
        raise RolloutError("--policy remote requires --policy-url URL")
    return RemotePolicy(args.policy_url)


def _coverage_map(path: str) -> dict[str, str]:
    log = read_removal_log(path)
    return dict(log.coverage)


def cmd_build_kg(args: argparse.Namespace) -> int:
    kg = load_triples(args.triples, args.aliases)
    if args.out:
        write_triples(kg, args.out)
    stats = {
        "triples": len(kg),
        "entities": len(kg.aliases),
        "relations": len(kg.relations),
        "head_entities": len(kg.head_index),
    }
    print(json.dumps(stats))
    return 0


def cmd_sample_ikg(args: argparse.Namespace) -> int:
    kg = load_triples(args.triples, args.aliases)
    qa = load_qa(args.qa)
    derived, log = sample_ikg(kg, qa, args.fraction, args.seed)
    write_triples(derived, args.out_kg)
    write_removal_log(log, args.out_log)
    removed = sum(len(v) for v in log.entries.values())
    print(json.dumps({
        "fraction": args.fraction,
        "seed": args.seed,
        "questions": len(qa),
        "removed_critical": removed,
        "surviving_triples": len(derived),
    }))
    return 0


def cmd_rollout(args: argparse.Namespace) -> int:
    kg = load_triples(args.kg, args.aliases)
    qa = load_qa(args.qa)
    web = _make_web(args)
    policy = _make_policy(args)
    cfg = RolloutConfig(
        max_iterations=args.max_iters,
        top_k_relations=args.top_k_relations,
        top_k_docs=args.top_k_docs,
        seed=args.seed,
        strict_format=args.strict_format,
    )
    trajs = [run_rollout(policy, kg, web, ex, cfg) for ex in qa]
    write_trajectories(trajs, args.out)
    if args.masks:
        write_masks(trajs, args.masks)
    print(json.dumps({"questions": len(qa), "trajectories": len(trajs)}))
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    trajs = read_trajectories(args.traj)
    qa = {ex.id: ex for ex in load_qa(args.qa)}
    coverage = _coverage_map(args.ikg_log)
    records = []
    for traj in trajs:
        ex = qa.get(traj.question_id)
        if ex is None:
            raise QAError(f"trajectory {traj.question_id!r} has no QA record")
        if traj.question_id not in coverage:
            raise KGError(f"no coverage label for question {traj.question_id!r} in {args.ikg_log}")
        breakdown = rewards.score_trajectory(traj, ex.answers, coverage[traj.question_id])
        records.append(rewards.score_record(traj.question_id, breakdown, coverage[traj.question_id]))
    rewards.write_scores(records, args.out)
    print(json.dumps({"scored": len(records)}))
    return 0


def cmd_advantages(args: argparse.Namespace) -> int:
    records = rewards.read_scores(args.scores)
    groups = rewards.group_score_records(records, args.group_size)
    rewards.write_scores(groups, args.out)
    print(json.dumps({"groups": len(groups)}))
    return 0


def cmd_filter_sft(args: argparse.Namespace) -> int:
    trajs = read_trajectories(args.traj)
    qa = {ex.id: ex for ex in load_qa(args.qa)}
    coverage = _coverage_map(args.ikg_log)
    judge = filtering.RuleJudge() if args.judge == "rule" else filtering.RemoteJudge(args.judge_url or "")
    if args.judge == "remote" and not args.judge_url:
        raise filtering.JudgeError("--judge remote requires --judge-url URL")
    kept, dropped = [], 0
    for traj in trajs:
        ex = qa.get(traj.question_id)
        if ex is None:
            raise QAError(f"trajectory {traj.question_id!r} has no QA record")
        if traj.question_id not in coverage:
            raise KGError(f"no coverage label for question {traj.question_id!r} in {args.ikg_log}")
        verdict = filtering.filter_trajectory(traj, ex, coverage[traj.question_id], judge)
        if verdict.keep:
            kept.append(filtering.sft_record(ex, traj))
        else:
            dropped += 1
    filtering.write_sft(kept, args.out)
    print(json.dumps({"kept": len(kept), "dropped": dropped}))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    trajs = read_trajectories(args.traj)
    qa = load_qa(args.qa)
    report = evaluate.build_report(trajs, qa)
    evaluate.write_report(report, args.out)
    print(json.dumps(report))
    return 0


_COMMANDS = {
    "build-kg": cmd_build_kg,
    "sample-ikg": cmd_sample_ikg,
    "rollout": cmd_rollout,
    "score": cmd_score,
    "advantages": cmd_advantages,
    "filter-sft": cmd_filter_sft,
    "eval": cmd_eval,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, list(argv) if argv is not None else sys.argv[1:])
        return _COMMANDS[args.command](args)
    except (KGError, QAError, WebToolError, RolloutError, filtering.JudgeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

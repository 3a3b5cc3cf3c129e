"""Bundled toy suite: a small curated graph, 25 questions with recorded
plans (single-hop, multi-answer, chained and intersection plans), aliases,
and an offline web corpus covering every gold-path fact."""

from pathlib import Path

_TOY = Path(__file__).parent / "toy"

TOY_KG = _TOY / "kg.tsv"
TOY_ALIASES = _TOY / "aliases.jsonl"
TOY_QA = _TOY / "qa.jsonl"
TOY_WEB_CORPUS = _TOY / "web_corpus.jsonl"

import pytest

from kgqa_env.kg import Triple
from kgqa_env.qa import QAError, QAExample, load_qa, write_qa


def test_round_trip(tmp_path):
    ex = QAExample(
        id="q1",
        question="What country uses the Iranian rial?",
        topic_entities=("Iranian_rial",),
        answers=(("Iran", "Islamic Republic of Iran"),),
        critical_triples=(Triple("Iranian_rial", "currency_of", "Iran"),),
        plan="S1: Ans(country | currency_of(Iranian rial, ?))",
    )
    path = tmp_path / "qa.jsonl"
    write_qa([ex], path)
    assert load_qa(path) == [ex]


def test_plan_field_is_optional(tmp_path):
    path = tmp_path / "qa.jsonl"
    path.write_text('{"id": "q", "question": "?", "topic_entities": [], "answers": [["a"]]}\n')
    (ex,) = load_qa(path)
    assert ex.plan is None
    assert ex.critical_triples == ()


def test_malformed_record_names_line(tmp_path):
    path = tmp_path / "qa.jsonl"
    path.write_text('{"id": "q1", "question": "?", "topic_entities": [], "answers": [["a"]]}\n{"id": "q2"}\n')
    with pytest.raises(QAError, match="line 2"):
        load_qa(path)


def test_duplicate_ids_rejected(tmp_path):
    path = tmp_path / "qa.jsonl"
    line = '{"id": "q", "question": "?", "topic_entities": [], "answers": [["a"]]}\n'
    path.write_text(line + line)
    with pytest.raises(QAError, match="duplicate"):
        load_qa(path)

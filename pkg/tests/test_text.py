from kgqa_env.text import contains_normalized, levenshtein, normalize, token_jaccard, word_tokens


def test_normalize_lowers_trims_and_collapses():
    assert normalize('  "Iran."  ') == "iran"
    assert normalize("Harold\n  Ramis") == "harold ramis"
    assert normalize("") == ""


def test_word_tokens_split_on_dots_and_underscores():
    assert word_tokens("currency_of") == ["currency", "of"]
    assert word_tokens("people.person.born_in") == ["people", "person", "born", "in"]


def test_token_jaccard():
    assert token_jaccard("used in country", "country_used") == 2 / 3
    assert token_jaccard("anything", "") == 0.0


def test_levenshtein_known_values():
    assert levenshtein("kitten", "sitting") == 3
    assert levenshtein("abc", "abc") == 0
    assert levenshtein("", "abc") == 3


def test_contains_normalized():
    assert contains_normalized("Results: Harold  Ramis; Billy Crystal", "harold ramis")
    assert not contains_normalized("nothing here", "iran")
    assert not contains_normalized("anything", "   ")

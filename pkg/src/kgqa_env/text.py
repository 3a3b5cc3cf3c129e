"""Text normalization and similarity helpers shared across the package."""

from __future__ import annotations

import re
import string

_WS = re.compile(r"\s+")
_NON_WORD = re.compile(r"[^0-9a-z]+")
_STRIP_CHARS = string.punctuation + string.whitespace


def normalize(text: str) -> str:
    """Canonical comparison form: lowercase, trimmed, surrounding punctuation
    stripped, inner whitespace collapsed to single spaces."""
    out = text.strip(_STRIP_CHARS)
    out = _WS.sub(" ", out)
    return out.lower()


def word_tokens(text: str) -> list[str]:
    """Lowercase word tokens; splits on whitespace, punctuation, dots and
    underscores (so ``currency_of`` yields ``currency``, ``of``)."""
    return [t for t in _NON_WORD.split(text.lower()) if t]


def token_jaccard(a: str, b: str) -> float:
    """Jaccard overlap of the word-token sets of two strings (0 when either
    side has no tokens)."""
    ta, tb = set(word_tokens(a)), set(word_tokens(b))
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def levenshtein(a: str, b: str) -> int:
    """Classic edit distance, two-row DP."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def contains_normalized(haystack: str, needle: str) -> bool:
    """True when the normalized needle occurs as a substring of the
    normalized haystack; empty needles never match."""
    n = normalize(needle)
    return bool(n) and n in normalize(haystack)

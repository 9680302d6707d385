"""Unicode-aware word tokenization shared by keyword extraction, matching, and hashing."""

from __future__ import annotations

import re

# Alphanumeric runs (Unicode letters and digits, underscore excluded).
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

MIN_TOKEN_LEN = 2


def tokenize(text: str, min_len: int = MIN_TOKEN_LEN) -> list[str]:
    """Lowercase tokens split on non-alphanumerics, keeping tokens of length >= min_len.

    No stemming; misspelling variants are expected to arrive via supplementary
    keyword lists rather than normalization.
    """
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= min_len]

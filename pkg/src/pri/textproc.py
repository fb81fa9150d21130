"""Turning raw query and advert text into comparable term sequences.

The pipeline is: lowercase, split on runs of [a-z0-9], drop stopwords,
stem, then drop stopwords once more.  The second pass matters because a
stem can land on a stopword that its surface form missed ("ies" -> "i").
Category labels are never passed through here -- only displayed text is.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

from .porter import stem

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric tokens in order of appearance."""
    return _TOKEN_RE.findall(text.lower())


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read a one-word-per-line stopword file; blank lines are ignored."""
    words = Path(path).read_text(encoding="utf-8").split()
    return frozenset(w.lower() for w in words)


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    text = resources.files("pri").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(text.split())


class TermFilter:
    """Maps free text to its sequence of stemmed content terms."""

    def __init__(self, stopwords: Iterable[str] | None = None) -> None:
        self.stopwords = (
            default_stopwords() if stopwords is None else frozenset(stopwords)
        )
        self._memo: dict[str, tuple[str, ...]] = {}

    def terms(self, text: str) -> list[str]:
        # Sessions re-filter the same advert strings thousands of times;
        # memoizing per instance keeps stemming off the hot path.
        cached = self._memo.get(text)
        if cached is None:
            out = []
            for token in tokenize(text):
                if token in self.stopwords:
                    continue
                stemmed = stem(token)
                if stemmed not in self.stopwords:
                    out.append(stemmed)
            cached = tuple(out)
            self._memo[text] = cached
        return list(cached)

    def __call__(self, text: str) -> list[str]:
        return self.terms(text)


@lru_cache(maxsize=1)
def default_filter() -> TermFilter:
    return TermFilter()


def filter_terms(text: str) -> list[str]:
    """Apply the bundled default filter to one piece of text."""
    return default_filter().terms(text)

"""Independent reference implementations used only by the test suite.

These are deliberately naive, literal translations of the scoring definition:
a double loop over dictionary terms and adverts in exact rational arithmetic.
They share no code with the package under test.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Sequence

TermLists = Sequence[tuple[str, Sequence[str]]]  # (label, filtered terms)


def frequency(term: str, terms: Sequence[str], dictionary: set[str]) -> Fraction:
    """Occurrences of a dictionary term over full sequence length; else 0."""
    if term not in dictionary or not terms:
        return Fraction(0)
    return Fraction(sum(1 for t in terms if t == term), len(terms))


def reference_score(
    training: TermLists,
    page: Sequence[Sequence[str]],
    category: str,
) -> Fraction:
    """Literal term-by-term evaluation of the category score for one page."""
    dictionary = {t for _, terms in training for t in terms}
    total = Fraction(0)
    for w in sorted(dictionary):
        numerator = sum(
            (frequency(w, terms, dictionary) for label, terms in training
             if label == category),
            Fraction(0),
        )
        denominator = sum(
            (frequency(w, terms, dictionary) for _, terms in training),
            Fraction(0),
        )
        page_mass = sum(
            (frequency(w, advert, dictionary) for advert in page), Fraction(0)
        )
        if denominator:
            total += (numerator / denominator) * page_mass
    return total


def reference_score_texts(
    corpus: Sequence[tuple[str, str]],
    page_texts: Sequence[str],
    category: str,
    filter_fn: Callable[[str], list[str]],
) -> Fraction:
    training = [(label, filter_fn(text)) for label, text in corpus]
    page = [filter_fn(text) for text in page_texts]
    return reference_score(training, page, category)

"""Training and scoring of the category term-frequency model.

Training accumulates, for every dictionary term, its summed per-advert
frequency overall and per category, in exact rational arithmetic.  Scoring a
page computes, per category, the sum over dictionary terms of

    (category share of the term) x (term mass on the page's adverts)

where a term's frequency inside an advert is its count over the advert's full
filtered length, and terms outside the dictionary contribute nothing.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import IO, Iterable, Sequence

from .corpus import Advert, CategorySet, Dictionary, LabeledAdvert, build_dictionary
from .errors import ValidationError
from .textproc import TermFilter

MODEL_HEADER = "#pri-model v1"


@dataclass(frozen=True)
class TermStats:
    """Aggregated training frequencies: totals and their per-category split."""

    total: dict[str, Fraction]
    per_category: dict[str, dict[str, Fraction]]

    def share(self, term: str, category: str) -> Fraction:
        return self.per_category[term].get(category, Fraction(0)) / self.total[term]


@dataclass(frozen=True)
class PriModel:
    categories: CategorySet
    dictionary: Dictionary
    stats: TermStats
    term_filter: TermFilter = field(compare=False)
    empty_categories: tuple[str, ...] = ()


@dataclass(frozen=True)
class ScoreVector:
    step: int
    scores: dict[str, Fraction]

    def as_floats(self) -> dict[str, float]:
        return {c: float(v) for c, v in self.scores.items()}


def _advert_frequencies(terms: Sequence[str]) -> dict[str, Fraction]:
    if not terms:
        return {}
    length = len(terms)
    return {t: Fraction(n, length) for t, n in Counter(terms).items()}


def train(
    corpus: list[LabeledAdvert],
    categories: CategorySet,
    term_filter: TermFilter | None = None,
) -> PriModel:
    if not corpus:
        raise ValidationError("cannot train on an empty corpus")
    flt = term_filter or TermFilter()
    for advert in corpus:
        if advert.label not in categories:
            raise ValidationError(f"corpus label {advert.label!r} not in categories")

    dictionary = build_dictionary(corpus, flt)
    labels = categories.all_labels
    total: dict[str, Fraction] = {t: Fraction(0) for t in dictionary}
    per_category: dict[str, dict[str, Fraction]] = {
        t: {c: Fraction(0) for c in labels} for t in dictionary
    }
    seen_labels: set[str] = set()

    for advert in corpus:
        seen_labels.add(advert.label)
        for term, freq in _advert_frequencies(flt.terms(advert.text)).items():
            total[term] += freq
            per_category[term][advert.label] += freq

    empty = tuple(c for c in categories.all_labels if c not in seen_labels)
    return PriModel(
        categories=categories,
        dictionary=dictionary,
        stats=TermStats(total=total, per_category=per_category),
        term_filter=flt,
        empty_categories=empty,
    )


def score(
    model: PriModel,
    adverts: Sequence[str | Advert],
    step: int = 0,
) -> ScoreVector:
    """Score one page of adverts against every category."""
    scores = {c: Fraction(0) for c in model.categories.all_labels}
    for advert in adverts:
        text = advert.text if isinstance(advert, Advert) else advert
        for term, freq in _advert_frequencies(model.term_filter.terms(text)).items():
            if term not in model.dictionary:
                continue
            total = model.stats.total[term]
            for category, weight in model.stats.per_category[term].items():
                if weight:
                    scores[category] += (weight / total) * freq
    return ScoreVector(step=step, scores=scores)


# ---------------------------------------------------------------------------
# model file round trip
# ---------------------------------------------------------------------------


def _format_fraction(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def _parse_fraction(text: str, lineno: int) -> Fraction:
    num, sep, den = text.partition("/")
    if not sep:
        raise ValidationError(f"model line {lineno}: bad rational {text!r}")
    try:
        return Fraction(int(num), int(den))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"model line {lineno}: bad rational {text!r}") from exc


def write_model(model: PriModel, out: IO[str]) -> None:
    out.write(MODEL_HEADER + "\n")
    out.write("categories\t" + ",".join(model.categories.sensitive) + "\n")
    out.write("catchall\t" + model.categories.catchall + "\n")
    if model.empty_categories:
        out.write("empty\t" + ",".join(model.empty_categories) + "\n")
    terms = model.dictionary.terms
    for term_id, term in enumerate(terms):
        out.write(f"dict\t{term_id}\t{term}\n")
    for term_id, term in enumerate(terms):
        parts = [
            f"{category}={_format_fraction(weight)}"
            for category, weight in sorted(model.stats.per_category[term].items())
            if weight
        ]
        out.write(
            f"stat\t{term_id}\t{_format_fraction(model.stats.total[term])}\t"
            + ",".join(parts)
            + "\n"
        )


def save_model(model: PriModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_model(model, fh)


def parse_model(lines: Iterable[str], term_filter: TermFilter | None = None) -> PriModel:
    it = iter(lines)
    try:
        header = next(it).rstrip("\n")
    except StopIteration:
        raise ValidationError("empty model file") from None
    if header != MODEL_HEADER:
        raise ValidationError(f"unsupported model header {header!r}")

    sensitive: tuple[str, ...] | None = None
    catchall = "other"
    empty: tuple[str, ...] = ()
    id_to_term: dict[int, str] = {}
    totals: dict[str, Fraction] = {}
    per_category: dict[str, dict[str, Fraction]] = {}

    for lineno, raw in enumerate(it, start=2):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        kind, _, rest = line.partition("\t")
        if kind == "categories":
            sensitive = tuple(c for c in rest.split(",") if c)
        elif kind == "catchall":
            catchall = rest
        elif kind == "empty":
            empty = tuple(c for c in rest.split(",") if c)
        elif kind == "dict":
            id_text, _, term = rest.partition("\t")
            id_to_term[int(id_text)] = term
        elif kind == "stat":
            fields = rest.split("\t")
            if len(fields) != 3:
                raise ValidationError(f"model line {lineno}: malformed stat line")
            term = id_to_term.get(int(fields[0]))
            if term is None:
                raise ValidationError(f"model line {lineno}: unknown term id")
            totals[term] = _parse_fraction(fields[1], lineno)
            buckets: dict[str, Fraction] = {}
            for part in fields[2].split(","):
                if not part:
                    continue
                category, _, value = part.partition("=")
                buckets[category] = _parse_fraction(value, lineno)
            per_category[term] = buckets
        else:
            raise ValidationError(f"model line {lineno}: unknown record {kind!r}")

    if sensitive is None:
        raise ValidationError("model file lacks a categories line")
    if set(totals) != set(id_to_term.values()):
        raise ValidationError("model stats do not cover the dictionary")
    labels = sensitive + (catchall,)
    for term, total in totals.items():
        if sum(per_category[term].values(), Fraction(0)) != total:
            raise ValidationError(f"model stats for {term!r} do not sum to total")
        per_category[term] = {
            c: per_category[term].get(c, Fraction(0)) for c in labels
        }

    mapping = {term: term_id for term_id, term in sorted(id_to_term.items())}
    return PriModel(
        categories=CategorySet(sensitive=sensitive, catchall=catchall),
        dictionary=Dictionary(mapping),
        stats=TermStats(total=totals, per_category=per_category),
        term_filter=term_filter or TermFilter(),
        empty_categories=empty,
    )


def load_model(path: str | Path, term_filter: TermFilter | None = None) -> PriModel:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read model {path}: {exc}") from exc
    return parse_model(lines, term_filter)

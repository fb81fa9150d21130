"""Session script generation, the script file format, and click emulation.

A script is the unit of a user session: an ordered list of query entries
(user queries and injected probes) with wait directives between them.  User
queries are keyword groups drawn with replacement from a category's phrase
list and dressed with a connective so they read like search queries.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from importlib import resources

from .errors import ValidationError
from .textproc import TermFilter, default_filter


@lru_cache(maxsize=None)
def _default_term_set(phrases: tuple[str, ...]) -> frozenset[str]:
    flt = default_filter()
    return frozenset(t for p in phrases for t in flt.terms(p))

# Connective templates used to dress keyword groups up as plausible queries.
# Kept free of terms from every bundled topic vocabulary so the dressing never
# changes which topics a query matches.
CONNECTIVES = ("", "how to", "what is", "find", "best", "near me", "why do",
               "top", "get", "about")

MIN_QUERIES = 25
MAX_QUERIES = 40
MIN_PROBE_GAP = 1
MAX_PROBE_GAP = 5
MIN_WAIT = 1
MAX_WAIT = 10

KIND_QUERY = "query"
KIND_PROBE = "probe"
KIND_WAIT = "wait"


@dataclass(frozen=True)
class CategoryKeywords:
    label: str
    phrases: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.label:
            raise ValidationError("category keywords need a label")
        if not self.phrases or any(not p.strip() for p in self.phrases):
            raise ValidationError(
                f"category {self.label!r} needs nonempty keyword phrases"
            )

    def term_set(self, term_filter: TermFilter | None = None) -> frozenset[str]:
        if term_filter is None:
            return _default_term_set(self.phrases)
        return frozenset(
            t for p in self.phrases for t in term_filter.terms(p)
        )


@dataclass(frozen=True)
class ScriptEntry:
    kind: str
    text: str = ""
    seconds: int = 0

    def __post_init__(self) -> None:
        if self.kind not in (KIND_QUERY, KIND_PROBE, KIND_WAIT):
            raise ValidationError(f"unknown script entry kind {self.kind!r}")
        if self.kind == KIND_WAIT:
            if self.seconds <= 0:
                raise ValidationError("wait entries need a positive duration")
        elif not self.text.strip():
            raise ValidationError("query entries need text")


@dataclass(frozen=True)
class QueryScript:
    topic: str
    probe: str
    entries: tuple[ScriptEntry, ...]
    keywords: tuple[str, ...] = ()

    @property
    def query_entries(self) -> tuple[ScriptEntry, ...]:
        return tuple(e for e in self.entries if e.kind != KIND_WAIT)

    @property
    def query_count(self) -> int:
        return len(self.query_entries)

    @property
    def probe_count(self) -> int:
        return sum(1 for e in self.entries if e.kind == KIND_PROBE)

    @property
    def probe_gaps(self) -> tuple[int, ...]:
        """User-query run lengths between consecutive probes."""
        gaps = []
        run = 0
        seen_probe = False
        for entry in self.query_entries:
            if entry.kind == KIND_PROBE:
                if seen_probe:
                    gaps.append(run)
                run = 0
                seen_probe = True
            else:
                run += 1
        return tuple(gaps)


@dataclass(frozen=True)
class ClickPolicy:
    keywords: CategoryKeywords
    tf_threshold: float = 0.1
    dwell_seconds: int = 5

    def __post_init__(self) -> None:
        if self.tf_threshold <= 0:
            raise ValidationError("click threshold must be positive")


def load_default_keywords() -> dict[str, list[str]]:
    """Bundled keyword phrase lists, keyed by sensitive category label."""
    text = (
        resources.files("pri")
        .joinpath("data/category_keywords.tsv")
        .read_text("utf-8")
    )
    keywords: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        label, sep, phrase = line.partition("\t")
        if not sep or not phrase.strip():
            raise ValidationError(f"keywords line {lineno}: expected label<TAB>phrase")
        keywords.setdefault(label, []).append(phrase.strip())
    return keywords


def load_trending_queries() -> list[str]:
    """Bundled non-sensitive query pool for the catch-all category."""
    text = (
        resources.files("pri")
        .joinpath("data/trending_queries.txt")
        .read_text("utf-8")
    )
    return [
        line.strip()
        for line in text.splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]


def _keyword_terms_line(keywords: CategoryKeywords) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for phrase in keywords.phrases:
        for word in phrase.split():
            seen.setdefault(word, None)
    return tuple(seen)


def generate_script(
    keywords: CategoryKeywords,
    probe: str,
    rng: random.Random,
    min_queries: int = MIN_QUERIES,
    max_queries: int = MAX_QUERIES,
) -> QueryScript:
    """Probe-led script: [probe, gap of 1-5 user queries]... ending on a probe."""
    if not probe.strip():
        raise ValidationError("scripts need a probe query")
    if min_queries < 3:
        raise ValidationError("scripts need room for at least two probes")
    if min_queries > max_queries:
        raise ValidationError("min_queries exceeds max_queries")
    # Aim below the ceiling so a final full gap cannot overshoot it.
    target_cap = max(min_queries, max_queries - MAX_PROBE_GAP - 1)
    target = rng.randint(min_queries, target_cap)

    queries: list[ScriptEntry] = [ScriptEntry(KIND_PROBE, probe)]
    while len(queries) < target:
        gap_room = target - len(queries) - 1
        gap = rng.randint(MIN_PROBE_GAP, MAX_PROBE_GAP)
        if gap >= gap_room:
            gap = gap_room  # close the script on this probe
        elif gap_room - gap == 1:
            # Never leave room for exactly one more query: the closing probe
            # would then follow this one with no user queries between.
            gap = gap - 1 if gap > 1 else gap_room
        for _ in range(gap):
            group_size = rng.randint(1, 2)
            phrases = [rng.choice(keywords.phrases) for _ in range(group_size)]
            connective = rng.choice(CONNECTIVES)
            text = " ".join((connective + " " + " ".join(phrases)).split())
            queries.append(ScriptEntry(KIND_QUERY, text))
        queries.append(ScriptEntry(KIND_PROBE, probe))

    entries: list[ScriptEntry] = []
    for i, entry in enumerate(queries):
        entries.append(entry)
        if i < len(queries) - 1:
            entries.append(ScriptEntry(KIND_WAIT, seconds=rng.randint(MIN_WAIT,
                                                                      MAX_WAIT)))
    script = QueryScript(
        topic=keywords.label,
        probe=probe,
        entries=tuple(entries),
        keywords=_keyword_terms_line(keywords),
    )
    _check_generated(script, min_queries, max_queries)
    return script


def _check_generated(script: QueryScript, min_queries: int, max_queries: int) -> None:
    count = script.query_count
    if not min_queries <= count <= max_queries:
        raise ValidationError(f"generated script has {count} queries")
    if script.query_entries[0].kind != KIND_PROBE:
        raise ValidationError("generated script must open with a probe")
    if script.query_entries[-1].kind != KIND_PROBE:
        raise ValidationError("generated script must close with a probe")
    bad = [g for g in script.probe_gaps
           if not MIN_PROBE_GAP <= g <= MAX_PROBE_GAP]
    if bad:
        raise ValidationError(f"probe gaps out of range: {bad}")


def click_decision(
    item_text: str,
    policy: ClickPolicy,
    is_probe_response: bool,
    term_filter: TermFilter | None = None,
) -> bool:
    """Click iff keyword-term frequency in the item text exceeds the threshold.

    Responses to probe queries are never clicked.
    """
    if is_probe_response:
        return False
    flt = term_filter or default_filter()
    terms = flt.terms(item_text)
    if not terms:
        return False
    keyword_terms = policy.keywords.term_set(flt)
    hits = sum(1 for t in terms if t in keyword_terms)
    return hits / len(terms) > policy.tf_threshold


# ---------------------------------------------------------------------------
# script files (directives "! keywords:", "! probe:", "! topic:", "! wait N";
# every other nonempty line is a query, probes recognized by their text)
# ---------------------------------------------------------------------------


def write_script(script: QueryScript, out: IO[str]) -> None:
    if script.keywords:
        out.write(f"! keywords: {' '.join(script.keywords)}\n")
    out.write(f"! probe: {script.probe}\n")
    if script.topic:
        out.write(f"! topic: {script.topic}\n")
    for entry in script.entries:
        if entry.kind == KIND_WAIT:
            out.write(f"! wait {entry.seconds}\n")
        else:
            out.write(entry.text + "\n")


def save_script(script: QueryScript, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_script(script, fh)


def parse_script(lines: Iterable[str]) -> QueryScript:
    probe = ""
    topic = ""
    keywords: tuple[str, ...] = ()
    entries: list[ScriptEntry] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("!"):
            directive = line[1:].strip()
            if directive.startswith("keywords:"):
                keywords = tuple(directive[len("keywords:"):].split())
            elif directive.startswith("probe:"):
                probe = directive[len("probe:"):].strip()
            elif directive.startswith("topic:"):
                topic = directive[len("topic:"):].strip()
            elif directive.startswith("wait"):
                value = directive[len("wait"):].strip()
                try:
                    seconds = int(value)
                except ValueError:
                    raise ValidationError(
                        f"script line {lineno}: bad wait duration {value!r}"
                    ) from None
                entries.append(ScriptEntry(KIND_WAIT, seconds=seconds))
            else:
                raise ValidationError(
                    f"script line {lineno}: unknown directive {line!r}"
                )
            continue
        kind = KIND_PROBE if probe and line == probe else KIND_QUERY
        entries.append(ScriptEntry(kind, line))
    if not probe:
        raise ValidationError("script file declares no probe")
    if not entries:
        raise ValidationError("script file has no query entries")
    return QueryScript(topic=topic, probe=probe, entries=tuple(entries),
                       keywords=keywords)


def load_script(path: str | Path) -> QueryScript:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read script {path}: {exc}") from exc
    return parse_script(text.splitlines())


def catchall_keywords(
    label: str = "other", queries: Sequence[str] | None = None
) -> CategoryKeywords:
    """Catch-all phrase pool drawn from the bundled trending queries."""
    pool = list(queries) if queries is not None else load_trending_queries()
    return CategoryKeywords(label=label, phrases=tuple(pool))


def keyword_catalog(
    keywords: Mapping[str, Sequence[str]] | None = None,
    catchall: str = "other",
) -> dict[str, CategoryKeywords]:
    """CategoryKeywords for every topic including the catch-all pool."""
    table = keywords if keywords is not None else load_default_keywords()
    catalog = {
        label: CategoryKeywords(label=label, phrases=tuple(phrases))
        for label, phrases in table.items()
    }
    catalog[catchall] = catchall_keywords(catchall)
    return catalog

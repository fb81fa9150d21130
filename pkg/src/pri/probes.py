"""Probe-query selection: candidate term ranking and ambiguity screening.

A good probe is frequent in served pages (so responses are informative) yet
ambiguous enough not to narrow results sharply.  Candidates are ranked by
aggregate term frequency over collected pages; candidate probes are then
screened by the ratio N(topic, probe) / N(topic) of engine result counts, and
by a hygiene rule: a probe must not contain any term from the keyword list of
a topic it will be used against.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from importlib import resources

from .corpus import ResultPage
from .errors import ValidationError
from .textproc import TermFilter, default_filter, tokenize

DEFAULT_PROBES = ("symptoms and causes", "help and advice")
DEFAULT_MIN_RATIO = 0.01


@dataclass(frozen=True)
class ProbeCandidate:
    term: str
    surface: str
    tf: int

    def __post_init__(self) -> None:
        if not self.term or not self.surface:
            raise ValidationError("probe candidate needs a term and a surface form")
        if self.tf <= 0:
            raise ValidationError("probe candidate frequency must be positive")


@dataclass(frozen=True)
class AmbiguityEntry:
    topic: str
    probe: str
    n_topic: int
    n_topic_probe: int

    @property
    def ratio(self) -> float:
        return ambiguity_ratio(self.n_topic, self.n_topic_probe)

    @property
    def anomalous(self) -> bool:
        """Probe text should narrow results, never widen them."""
        return self.n_topic_probe > self.n_topic


@dataclass(frozen=True)
class AmbiguityReport:
    entries: tuple[AmbiguityEntry, ...]

    def lookup(self, topic: str, probe: str) -> AmbiguityEntry:
        for entry in self.entries:
            if entry.topic == topic and entry.probe == probe:
                return entry
        raise ValidationError(f"no ambiguity counts for ({topic!r}, {probe!r})")

    @property
    def probes(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for entry in self.entries:
            seen.setdefault(entry.probe, None)
        return tuple(seen)


def _page_texts(page: ResultPage) -> Iterable[str]:
    for title, snippet in page.links:
        yield title
        yield snippet
    for advert in page.adverts:
        yield advert.text


def extract_candidates(
    pages: Sequence[ResultPage],
    term_filter: TermFilter | None = None,
    top_k: int = 10,
) -> list[ProbeCandidate]:
    """Rank stems by aggregate frequency over link and advert text."""
    if not pages:
        raise ValidationError("cannot extract probe candidates from zero pages")
    if top_k <= 0:
        raise ValidationError("top_k must be positive")
    flt = term_filter or default_filter()
    stem_counts: Counter = Counter()
    surface_counts: dict[str, Counter] = {}
    for page in pages:
        for text in _page_texts(page):
            stem_counts.update(flt.terms(text))
            # Track raw-token spellings so candidates render as surface words.
            for token in tokenize(text):
                stemmed = flt.terms(token)
                if len(stemmed) == 1:
                    surface_counts.setdefault(stemmed[0], Counter())[token] += 1
    ranked = sorted(stem_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    candidates = []
    for term, count in ranked[:top_k]:
        surfaces = surface_counts.get(term, Counter({term: 1}))
        surface = min(surfaces, key=lambda s: (-surfaces[s], s))
        candidates.append(ProbeCandidate(term=term, surface=surface, tf=count))
    return candidates


def render_probe(candidates: Sequence[ProbeCandidate], connective: str = "and") -> str:
    if not candidates:
        raise ValidationError("cannot render a probe from zero candidates")
    return f" {connective} ".join(c.surface for c in candidates)


def ambiguity_ratio(n_topic: int, n_topic_probe: int) -> float:
    if n_topic <= 0:
        raise ValidationError("topic result count must be positive")
    if n_topic_probe < 0:
        raise ValidationError("probe result count cannot be negative")
    return n_topic_probe / n_topic


def ratio_percent(ratio: float) -> int:
    """Whole-number percentage, rounding to nearest."""
    return round(ratio * 100)


def select_probe(
    probes: Sequence[str],
    report: AmbiguityReport,
    topics: Sequence[str],
    min_ratio: float = DEFAULT_MIN_RATIO,
    keywords: Mapping[str, Sequence[str]] | None = None,
    term_filter: TermFilter | None = None,
) -> str:
    """First probe usable for every topic in the group.

    Usable means the ambiguity ratio meets `min_ratio` for each topic and the
    probe shares no filtered term with any group topic's keyword phrases.
    """
    if not probes:
        raise ValidationError("no candidate probes supplied")
    if not topics:
        raise ValidationError("no topics in the group")
    flt = term_filter or default_filter()
    keyword_stems: dict[str, frozenset[str]] = {}
    for topic in topics:
        phrases = (keywords or {}).get(topic, ())
        keyword_stems[topic] = frozenset(
            term for phrase in phrases for term in flt.terms(phrase)
        )
    failures: list[str] = []
    for probe in probes:
        probe_terms = frozenset(flt.terms(probe))
        revealing = sorted(t for t in topics if probe_terms & keyword_stems[t])
        if revealing:
            failures.append(
                f"{probe!r} shares keyword terms with {', '.join(revealing)}"
            )
            continue
        ratios = {t: report.lookup(t, probe).ratio for t in topics}
        low = sorted(t for t, r in ratios.items() if r < min_ratio)
        if low:
            worst = ", ".join(f"{t}={ratios[t]:.4f}" for t in low)
            failures.append(f"{probe!r} too narrowing for {worst}")
            continue
        return probe
    raise ValidationError(
        "no probe passes the policy for this topic group: " + "; ".join(failures)
    )


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------


def write_candidates_csv(candidates: Sequence[ProbeCandidate], out: IO[str]) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["rank", "term", "tf"])
    for rank, candidate in enumerate(candidates, start=1):
        writer.writerow([rank, candidate.term, candidate.tf])


def write_ambiguity_csv(report: AmbiguityReport, out: IO[str]) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["topic", "probe", "n_topic", "n_topic_probe", "ratio"])
    for entry in report.entries:
        writer.writerow(
            [entry.topic, entry.probe, entry.n_topic, entry.n_topic_probe,
             f"{entry.ratio:.6f}"]
        )


def parse_ambiguity_csv(lines: Iterable[str]) -> AmbiguityReport:
    reader = csv.DictReader(lines)
    required = {"topic", "probe", "n_topic", "n_topic_probe"}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise ValidationError(
            "ambiguity CSV needs columns topic, probe, n_topic, n_topic_probe"
        )
    entries = []
    for row in reader:
        try:
            entries.append(
                AmbiguityEntry(
                    topic=row["topic"],
                    probe=row["probe"],
                    n_topic=int(row["n_topic"]),
                    n_topic_probe=int(row["n_topic_probe"]),
                )
            )
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad ambiguity row {row!r}: {exc}") from exc
    if not entries:
        raise ValidationError("ambiguity CSV has no data rows")
    return AmbiguityReport(entries=tuple(entries))


def load_ambiguity_csv(path: str | Path) -> AmbiguityReport:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read ambiguity counts {path}: {exc}") from exc
    return parse_ambiguity_csv(text.splitlines())


def default_ambiguity_report() -> AmbiguityReport:
    text = (
        resources.files("pri").joinpath("data/probe_ambiguity.csv").read_text("utf-8")
    )
    return parse_ambiguity_csv(text.splitlines())

"""Domain types and file formats for labeled adverts and session captures.

Two on-disk formats live here:

* corpus files: UTF-8 lines of ``label<TAB>advert text`` (``#`` comments and
  blank lines ignored);
* capture files: a ``#pri-capture v1`` header followed by one canonical JSON
  record per interaction, sorted by (session_id, step).  The writer emits a
  single canonical byte form so round-trip equality is meaningful.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

from .errors import ValidationError
from .textproc import TermFilter

CAPTURE_HEADER = "#pri-capture v1"


@dataclass(frozen=True)
class CategorySet:
    """The sensitive categories plus the catch-all bucket for everything else."""

    sensitive: tuple[str, ...]
    catchall: str = "other"

    def __post_init__(self) -> None:
        labels = list(self.sensitive) + [self.catchall]
        if len(set(labels)) != len(labels):
            raise ValidationError("category labels must be unique")
        if not self.catchall:
            raise ValidationError("catchall label must be nonempty")

    @property
    def all_labels(self) -> tuple[str, ...]:
        return self.sensitive + (self.catchall,)

    def __contains__(self, label: object) -> bool:
        return label in self.all_labels

    def __iter__(self) -> Iterator[str]:
        return iter(self.all_labels)


@dataclass(frozen=True)
class LabeledAdvert:
    label: str
    text: str


@dataclass(frozen=True)
class Advert:
    text: str
    position: int


@dataclass(frozen=True)
class ResultPage:
    """One response page: ordered (title, snippet) links plus advert slots."""

    links: tuple[tuple[str, str], ...]
    adverts: tuple[Advert, ...]

    def __post_init__(self) -> None:
        for i, ad in enumerate(self.adverts):
            if ad.position != i:
                raise ValidationError(
                    f"advert positions must be dense from 0, got {ad.position} at {i}"
                )


@dataclass(frozen=True)
class Interaction:
    step: int
    query: str
    page: ResultPage
    clicked: tuple[int, ...]
    is_probe: bool

    def __post_init__(self) -> None:
        if self.is_probe and self.clicked:
            raise ValidationError("probe responses are never clicked")
        for idx in self.clicked:
            if not 0 <= idx < len(self.page.adverts):
                raise ValidationError(f"clicked index {idx} out of range")


@dataclass(frozen=True)
class SessionTrace:
    session_id: str
    topic_label: str
    interactions: tuple[Interaction, ...]

    def __post_init__(self) -> None:
        steps = [it.step for it in self.interactions]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValidationError(
                f"session {self.session_id}: steps must be strictly increasing"
            )

    @property
    def probes(self) -> tuple[Interaction, ...]:
        return tuple(it for it in self.interactions if it.is_probe)


@dataclass
class Dictionary:
    """Dense term<->id bijection over the filtered training vocabulary."""

    _term_to_id: dict[str, int] = field(default_factory=dict)

    @property
    def terms(self) -> tuple[str, ...]:
        return tuple(sorted(self._term_to_id, key=self._term_to_id.__getitem__))

    def id_of(self, term: str) -> int:
        return self._term_to_id[term]

    def term_of(self, term_id: int) -> str:
        return self.terms[term_id]

    def __contains__(self, term: object) -> bool:
        return term in self._term_to_id

    def __len__(self) -> int:
        return len(self._term_to_id)

    def __iter__(self) -> Iterator[str]:
        return iter(self.terms)


def parse_corpus(lines: Iterable[str], categories: CategorySet) -> list[LabeledAdvert]:
    """Parse ``label<TAB>text`` records, rejecting unknown labels by line."""
    out: list[LabeledAdvert] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        label, sep, text = line.partition("\t")
        if not sep:
            raise ValidationError(f"corpus line {lineno}: missing tab separator")
        label = label.strip()
        text = text.strip()
        if label not in categories:
            raise ValidationError(f"corpus line {lineno}: unknown label {label!r}")
        if not text:
            raise ValidationError(f"corpus line {lineno}: empty advert text")
        out.append(LabeledAdvert(label, text))
    return out


def load_corpus(path: str | Path, categories: CategorySet) -> list[LabeledAdvert]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read corpus {path}: {exc}") from exc
    return parse_corpus(lines, categories)


def build_dictionary(corpus: list[LabeledAdvert], term_filter: TermFilter) -> Dictionary:
    """Collect every filtered term of the corpus, ids by first occurrence."""
    if not corpus:
        raise ValidationError("cannot build a dictionary from an empty corpus")
    mapping: dict[str, int] = {}
    for advert in corpus:
        for term in term_filter.terms(advert.text):
            if term not in mapping:
                mapping[term] = len(mapping)
    if not mapping:
        raise ValidationError("corpus contains no content terms after filtering")
    return Dictionary(mapping)


# ---------------------------------------------------------------------------
# capture files
# ---------------------------------------------------------------------------


def _record_for(trace: SessionTrace, interaction: Interaction) -> dict:
    return {
        "session_id": trace.session_id,
        "topic": trace.topic_label,
        "step": interaction.step,
        "query": interaction.query,
        "is_probe": interaction.is_probe,
        "links": [[t, s] for t, s in interaction.page.links],
        "adverts": [ad.text for ad in interaction.page.adverts],
        "clicked": list(interaction.clicked),
    }


def write_capture(traces: Iterable[SessionTrace], out: IO[str]) -> None:
    """Write the canonical byte form: header, then records sorted by id/step."""
    out.write(CAPTURE_HEADER + "\n")
    for trace in sorted(traces, key=lambda t: t.session_id):
        for interaction in trace.interactions:
            record = _record_for(trace, interaction)
            out.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
            out.write("\n")


def save_capture(traces: Iterable[SessionTrace], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_capture(traces, fh)


def parse_capture(lines: Iterable[str]) -> list[SessionTrace]:
    it = iter(lines)
    try:
        header = next(it).rstrip("\n")
    except StopIteration:
        raise ValidationError("empty capture: missing header") from None
    if header != CAPTURE_HEADER:
        raise ValidationError(f"unsupported capture header {header!r}")

    traces: list[SessionTrace] = []
    current_id: str | None = None
    current_topic = ""
    pending: list[Interaction] = []
    seen_ids: set[str] = set()

    def flush() -> None:
        if current_id is not None:
            traces.append(SessionTrace(current_id, current_topic, tuple(pending)))

    for lineno, raw in enumerate(it, start=2):
        line = raw.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"capture line {lineno}: bad record: {exc}") from exc
        try:
            sid = rec["session_id"]
            interaction = Interaction(
                step=rec["step"],
                query=rec["query"],
                page=ResultPage(
                    links=tuple((t, s) for t, s in rec["links"]),
                    adverts=tuple(
                        Advert(text, i) for i, text in enumerate(rec["adverts"])
                    ),
                ),
                clicked=tuple(rec["clicked"]),
                is_probe=rec["is_probe"],
            )
        except KeyError as exc:
            raise ValidationError(f"capture line {lineno}: missing field {exc}") from exc
        except ValidationError as exc:
            raise ValidationError(f"capture line {lineno}: {exc}") from exc

        if sid != current_id:
            flush()
            if sid in seen_ids or (current_id is not None and sid < current_id):
                raise ValidationError(
                    f"capture line {lineno}: records not sorted by session_id"
                )
            seen_ids.add(sid)
            current_id = sid
            current_topic = rec.get("topic", "")
            pending = []
        elif rec.get("topic", "") != current_topic:
            raise ValidationError(
                f"capture line {lineno}: conflicting topic for session {sid}"
            )
        if pending:
            if interaction.step == pending[-1].step:
                raise ValidationError(
                    f"capture line {lineno}: duplicate step {interaction.step} "
                    f"in session {sid}"
                )
            if interaction.step < pending[-1].step:
                raise ValidationError(
                    f"capture line {lineno}: out-of-order step {interaction.step} "
                    f"in session {sid}"
                )
        pending.append(interaction)

    flush()
    return traces


def load_capture(path: str | Path) -> list[SessionTrace]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read capture {path}: {exc}") from exc
    return parse_capture(lines)

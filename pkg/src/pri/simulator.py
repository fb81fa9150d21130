"""Deterministic advert-serving engine used as the adversary under test.

The engine keeps one nonnegative weight per category.  Every submitted query
is answered from the weights as already applied; only then does the pending
queue advance and the new query join it.  An update caused by interaction
``j`` (a query hitting a category's vocabulary, or a click on a served
advert) therefore first influences the page served for interaction
``j + adaptation_lag + 1``, for queries and clicks alike.

Advert slots are apportioned to categories by largest remainder over the
current weights, and each slot is filled from the category's pool slice.  The
slice size is chosen so that the expected number of distinct adverts on a
page matches the configured ``pool_diversity``.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .config import load_config, parse_config
from .corpus import Advert, CategorySet, ResultPage
from .errors import UsageError, ValidationError
from .textproc import TermFilter

QUERY_INCREMENT = 1.0
LINKS_PER_PAGE = 5
POOL_SIZE = 8

ENGINE_PRESETS = ("google_like", "bing_like")

# Appended to every generated sensitive advert; none of these words shares a
# stem with any keyword list, trending query, probe, or connective.
AD_TAIL = "official site trusted experts online deals"

# Neutral vocabulary for organic result links.
LINK_WORDS = (
    "guide", "overview", "article", "resource", "portal", "directory",
    "journal", "archive", "library", "reference", "summary", "insight",
    "bulletin", "digest", "handbook", "manual", "tutorial", "lesson",
    "introduction", "glossary", "index", "catalog", "listing", "gazette",
    "chronicle", "observer", "tribune", "herald", "monitor", "network",
    "channel", "station", "forum", "board", "thread", "discussion",
)

# Generic loan copy carried by both short-term-credit pools, so the two
# related categories advertise with overlapping wording.
SHARED_FINANCE_ADS = (
    "Cheap payday loans approved in minutes by trusted online lenders",
    "Payday cash advances cleared fast low rates instant approval",
    "Quick cash payday lending cheap rates for bad credit approved",
)
_SHARED_FINANCE_TOPICS = frozenset({"payday", "bankrupt"})

# Catch-all adverts are rewordings of one fixed bag of words: every page
# composed purely of them carries the same term multiset, whatever the
# sampling order.
_CATCHALL_ADS = (
    "Holiday packages football scores cinema listings official site"
    " trusted experts online deals",
    "Cinema listings and holiday packages with football scores from the"
    " official site: online deals by trusted experts",
    "Football scores, cinema listings and holiday packages - online deals"
    " from trusted experts at the official site",
    "Trusted experts for holiday packages and cinema listings with football"
    " scores; official site online deals",
    "Online deals on holiday packages, football scores and cinema listings"
    " from trusted experts official site",
    "Official site for football scores, holiday packages and cinema"
    " listings: trusted experts, online deals",
    "Holiday packages with cinema listings and football scores - trusted"
    " online experts, official site deals",
    "Cinema listings, football scores, holiday packages and online deals"
    " from the official site trusted experts",
)

# Filler between phrases inside generated adverts; every entry is a stopword
# sequence, so the glue never reaches the filtered term multiset.
_AD_GLUE = ("for", "with", "and", "from", "to", "on", "at", "as")


@dataclass(frozen=True)
class EngineConfig:
    adaptation_lag: int = 0
    click_boost: float = 2.0
    ads_per_page: int = 4
    pool_diversity: float = 3.3
    prior_knowledge: str = ""
    seed: int = 0

    def __post_init__(self) -> None:
        if self.adaptation_lag < 0:
            raise ValidationError("adaptation_lag must be >= 0")
        if self.click_boost <= 0 or not math.isfinite(self.click_boost):
            raise ValidationError("click_boost must be positive")
        if self.ads_per_page < 1:
            raise ValidationError("ads_per_page must be at least 1")
        if self.pool_diversity <= 0 or not math.isfinite(self.pool_diversity):
            raise ValidationError("pool_diversity must be positive")
        parse_prior_knowledge(self.prior_knowledge)


def parse_prior_knowledge(text: str) -> dict[str, float]:
    """Parse ``label:weight,label:weight`` into a weight mapping."""
    weights: dict[str, float] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        label, sep, value = part.partition(":")
        label = label.strip()
        if not sep or not label:
            raise ValidationError(
                f"prior knowledge entry {part!r} is not label:weight"
            )
        try:
            weight = float(value)
        except ValueError:
            raise ValidationError(
                f"prior knowledge weight for {label!r} is not a number"
            ) from None
        if weight <= 0 or not math.isfinite(weight):
            raise ValidationError(
                f"prior knowledge weight for {label!r} must be positive"
            )
        weights[label] = weight
    return weights


def expected_distinct(pool_size: int, draws: int) -> float:
    """Expected distinct adverts over uniform draws with replacement."""
    return pool_size * (1.0 - (1.0 - 1.0 / pool_size) ** draws)


def diversity_slice(pool_size: int, draws: int, target: float) -> int:
    """Smallest slice whose expected distinct-advert count best matches target."""
    if pool_size < 1:
        raise ValidationError("pool must hold at least one advert")
    return min(
        range(1, pool_size + 1),
        key=lambda k: (abs(expected_distinct(k, draws) - target), k),
    )


def apportion_slots(
    weights: Mapping[str, float], order: Sequence[str], slots: int
) -> dict[str, int]:
    """Largest-remainder apportionment; remainder ties keep `order`."""
    total = sum(weights[label] for label in order)
    if total <= 0:
        raise ValidationError("category weights must sum to a positive value")
    quotas = {label: slots * weights[label] / total for label in order}
    counts = {label: int(quotas[label]) for label in order}
    leftover = slots - sum(counts.values())
    by_remainder = sorted(order, key=lambda l: quotas[l] - counts[l], reverse=True)
    for label in by_remainder[:leftover]:
        counts[label] += 1
    return counts


def links_for_query(query: str) -> tuple[tuple[str, str], ...]:
    """Organic links for a query: stable, rank-ordered, content-free."""
    links = []
    for rank in range(LINKS_PER_PAGE):
        digest = hashlib.sha256(f"{query}\x1f{rank}".encode("utf-8")).digest()
        words = [LINK_WORDS[byte % len(LINK_WORDS)] for byte in digest[:8]]
        links.append((" ".join(words[:3]), " ".join(words[3:])))
    return tuple(links)


def _topic_ads(label: str, phrases: Sequence[str]) -> list[str]:
    """Eight adverts per category, each carrying the full phrase list.

    All rotations share one term multiset, so pages differ only in their
    category composition, never in the wording luck of a single draw.  The
    two short-term-credit categories swap their last three adverts for the
    shared generic loan copy.
    """
    if not phrases:
        raise ValidationError(f"category {label!r} has no keyword phrases")
    ads = []
    for i in range(POOL_SIZE):
        start = i % len(phrases)
        rotated = list(phrases[start:]) + list(phrases[:start])
        joiner = ", " if i % 2 else f" {_AD_GLUE[i]} "
        ads.append(f"{joiner.join(rotated)} {AD_TAIL}")
    if label in _SHARED_FINANCE_TOPICS:
        ads[POOL_SIZE - len(SHARED_FINANCE_ADS):] = list(SHARED_FINANCE_ADS)
    return ads


def build_ad_pools(
    keywords: Mapping[str, Sequence[str]], catchall: str
) -> dict[str, list[str]]:
    """Advert pools for every keyword category plus the catch-all bucket."""
    if not keywords:
        raise ValidationError("keyword map is empty")
    if catchall in keywords:
        raise ValidationError(
            f"catch-all label {catchall!r} collides with a keyword category"
        )
    pools = {
        label: _topic_ads(label, tuple(phrases))
        for label, phrases in keywords.items()
    }
    pools[catchall] = list(_CATCHALL_ADS)
    return pools


_KIND_QUERY = "query"
_KIND_CLICK = "click"


@dataclass(frozen=True)
class _Pending:
    countdown: int
    label: str
    kind: str


def _initial_belief(text: str, categories: CategorySet) -> dict[str, float]:
    prior = parse_prior_knowledge(text)
    unknown = sorted(set(prior) - set(categories.all_labels))
    if unknown:
        raise ValidationError(f"prior knowledge names unknown categories: {unknown}")
    raw = {label: prior.get(label, 1.0) for label in categories.all_labels}
    total = sum(raw.values())
    return {label: value / total for label, value in raw.items()}


class AdEngine:
    """Advert server whose belief trails interactions by ``adaptation_lag``."""

    def __init__(
        self,
        config: EngineConfig,
        pools: Mapping[str, Sequence[str]],
        categories: CategorySet,
        term_filter: TermFilter | None = None,
    ) -> None:
        missing = [c for c in categories.all_labels if c not in pools]
        if missing:
            raise ValidationError(f"no advert pool for categories: {missing}")
        self._config = config
        self._categories = categories
        self._flt = term_filter or TermFilter()
        self._slices: dict[str, tuple[str, ...]] = {}
        for label in categories.all_labels:
            pool = list(pools[label])
            if not pool:
                raise ValidationError(f"advert pool for {label!r} is empty")
            size = diversity_slice(len(pool), config.ads_per_page,
                                   config.pool_diversity)
            self._slices[label] = tuple(pool[:size])
        self._vocab = {
            label: frozenset(t for ad in ads for t in self._flt.terms(ad))
            for label, ads in self._slices.items()
        }
        self._weights = _initial_belief(config.prior_knowledge, categories)
        self._queue: list[_Pending] = []
        self._rng = random.Random(config.seed)
        self._last_served: tuple[str, ...] | None = None

    @property
    def config(self) -> EngineConfig:
        return self._config

    @property
    def categories(self) -> CategorySet:
        return self._categories

    def belief(self) -> dict[str, float]:
        """Current applied weights (pending updates excluded)."""
        return dict(self._weights)

    def advert_slice(self, label: str) -> tuple[str, ...]:
        if label not in self._slices:
            raise ValidationError(f"unknown category {label!r}")
        return self._slices[label]

    def submit_query(self, query: str) -> ResultPage:
        page, slot_labels = self._compose_page(query)
        self._advance_queue()
        for label in self._matched(query):
            self._register(label, _KIND_QUERY)
        self._last_served = slot_labels
        return page

    def register_click(self, position: int) -> None:
        """Record a click on an advert slot of the most recent page."""
        if self._last_served is None:
            raise ValidationError("cannot register a click before any page is served")
        if not 0 <= position < len(self._last_served):
            raise ValidationError(f"clicked position {position} is out of range")
        self._register(self._last_served[position], _KIND_CLICK)

    # -- internals --------------------------------------------------------

    def _compose_page(self, query: str) -> tuple[ResultPage, tuple[str, ...]]:
        counts = apportion_slots(self._weights, self._categories.all_labels,
                                 self._config.ads_per_page)
        adverts: list[Advert] = []
        slot_labels: list[str] = []
        for label in self._categories.all_labels:
            ads = self._slices[label]
            for _ in range(counts[label]):
                adverts.append(Advert(text=self._rng.choice(ads),
                                      position=len(adverts)))
                slot_labels.append(label)
        page = ResultPage(links=links_for_query(query), adverts=tuple(adverts))
        return page, tuple(slot_labels)

    def _matched(self, query: str) -> list[str]:
        terms = set(self._flt.terms(query))
        if not terms:
            return []
        return [
            label
            for label in self._categories.all_labels
            if terms & self._vocab[label]
        ]

    def _register(self, label: str, kind: str) -> None:
        lag = self._config.adaptation_lag
        if lag <= 0:
            self._apply(label, kind)
        else:
            self._queue.append(_Pending(lag, label, kind))

    def _apply(self, label: str, kind: str) -> None:
        if kind == _KIND_QUERY:
            self._weights[label] += QUERY_INCREMENT
        else:
            self._weights[label] *= self._config.click_boost

    def _advance_queue(self) -> None:
        still_pending: list[_Pending] = []
        for update in self._queue:
            countdown = update.countdown - 1
            if countdown <= 0:
                self._apply(update.label, update.kind)
            else:
                still_pending.append(replace(update, countdown=countdown))
        self._queue = still_pending


def new_engine(
    config: EngineConfig,
    pools: Mapping[str, Sequence[str]],
    categories: CategorySet,
) -> AdEngine:
    return AdEngine(config, pools, categories)


# ---------------------------------------------------------------------------
# engine configuration files
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {
    "adaptation_lag": int,
    "click_boost": float,
    "ads_per_page": int,
    "pool_diversity": float,
    "prior_knowledge": str,
    "seed": int,
}


def engine_config_from_mapping(mapping: Mapping[str, str]) -> EngineConfig:
    kwargs: dict[str, object] = {}
    for key, value in mapping.items():
        if key not in _CONFIG_KEYS:
            raise ValidationError(f"unknown engine setting {key!r}")
        convert = _CONFIG_KEYS[key]
        try:
            kwargs[key] = convert(value)
        except ValueError:
            raise ValidationError(
                f"engine setting {key} = {value!r} is not a valid "
                f"{convert.__name__}"
            ) from None
    return EngineConfig(**kwargs)  # type: ignore[arg-type]


def load_engine_config(
    source: str | Path, *, seed: int | None = None
) -> EngineConfig:
    """Resolve a preset name or a configuration file path."""
    name = str(source)
    if name in ENGINE_PRESETS:
        text = resources.files("pri").joinpath(f"data/{name}.cfg").read_text("utf-8")
        mapping = parse_config(text.splitlines(), source=name)
    else:
        path = Path(source)
        if not path.exists():
            raise UsageError(
                f"unknown engine {name!r}: not one of "
                f"{', '.join(ENGINE_PRESETS)} and no such file"
            )
        mapping = load_config(path)
    config = engine_config_from_mapping(mapping)
    if seed is not None:
        config = replace(config, seed=seed)
    return config

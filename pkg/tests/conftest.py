"""Shared fixtures: the four-advert golden corpus and its known statistics."""

from __future__ import annotations

import pytest

from pri.corpus import CategorySet, parse_corpus
from pri.textproc import TermFilter

# Two prostate adverts, two catch-all adverts.  Their filtered forms are the
# reference training set used throughout the golden tests:
#   [prostat cancer possibl risk learn here]
#   [prostat cancer suffer treat]
#   [diabet treat suffer discov revers natur]
#   [discov lifetim risk diabet]
GOLDEN_CORPUS_TEXT = """\
prostate\tProstate cancer: possibly at risk? Learn here!
prostate\tProstate cancer sufferers treated
other\tDiabetes treatment: sufferers discover reversal, naturally!
other\tDiscover lifetime risk of diabetes
"""

GOLDEN_DICTIONARY = {
    "prostat", "cancer", "possibl", "risk", "learn", "here", "suffer",
    "treat", "diabet", "discov", "revers", "natur", "lifetim",
}

GOLDEN_PAGE_ADVERT = "patient choose safer treatment here"


@pytest.fixture(scope="session")
def golden_categories() -> CategorySet:
    return CategorySet(sensitive=("prostate",), catchall="other")


@pytest.fixture(scope="session")
def golden_corpus(golden_categories):
    return parse_corpus(GOLDEN_CORPUS_TEXT.splitlines(), golden_categories)


@pytest.fixture(scope="session")
def golden_filter() -> TermFilter:
    return TermFilter()


@pytest.fixture(scope="session")
def default_keywords():
    from pri.scripts import load_default_keywords

    return load_default_keywords()


# Two sensitive topics, two sessions per split: the smallest campaign that
# still exercises training, calibration, and every verdict path (~1 s).
MINI_KEYWORDS = {
    "prostate": ["prostate", "cancer", "male"],
    "divorce": ["divorce", "separation", "family law"],
}


@pytest.fixture(scope="session")
def mini_campaign():
    from pri.runner import CampaignConfig, run_campaign

    config = CampaignConfig(
        keywords=MINI_KEYWORDS,
        train_sessions_per_topic=2,
        test_sessions_per_topic=2,
    )
    return run_campaign(config, master_seed=11)

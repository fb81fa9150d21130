"""Engine behaviour: belief updates, lag, page composition, pools, links."""

from __future__ import annotations

import itertools
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pri.corpus import CategorySet
from pri.errors import UsageError, ValidationError
from pri.simulator import (
    AD_TAIL,
    LINK_WORDS,
    LINKS_PER_PAGE,
    SHARED_FINANCE_ADS,
    EngineConfig,
    apportion_slots,
    build_ad_pools,
    diversity_slice,
    engine_config_from_mapping,
    expected_distinct,
    links_for_query,
    load_engine_config,
    new_engine,
    parse_prior_knowledge,
)
from pri.textproc import filter_terms


@pytest.fixture(scope="module")
def pools(default_keywords):
    return build_ad_pools(default_keywords, "other")


@pytest.fixture(scope="module")
def categories(default_keywords):
    return CategorySet(tuple(sorted(default_keywords)), "other")


def google_config(**overrides) -> EngineConfig:
    base = dict(adaptation_lag=0, click_boost=2.0, ads_per_page=4,
                pool_diversity=3.3, prior_knowledge="other:100", seed=7)
    base.update(overrides)
    return EngineConfig(**base)


def composition(page, pools) -> Counter:
    """Count page adverts by the pool(s) their text belongs to."""
    out: Counter = Counter()
    for ad in page.adverts:
        labels = sorted(l for l, pool in pools.items() if ad.text in pool)
        out["+".join(labels)] += 1
    return out


class TestEngineConfig:
    def test_defaults_are_valid(self):
        EngineConfig()

    @pytest.mark.parametrize("field,value", [
        ("adaptation_lag", -1),
        ("click_boost", 0.0),
        ("ads_per_page", 0),
        ("pool_diversity", 0.0),
        ("prior_knowledge", "other"),
        ("prior_knowledge", "other:abc"),
        ("prior_knowledge", "other:-3"),
    ])
    def test_invalid_fields_rejected(self, field, value):
        with pytest.raises(ValidationError):
            google_config(**{field: value})

    def test_prior_parsing(self):
        assert parse_prior_knowledge("") == {}
        assert parse_prior_knowledge("other:100") == {"other": 100.0}
        assert parse_prior_knowledge(" other:100 , payday:2.5 ") == {
            "other": 100.0, "payday": 2.5,
        }

    def test_mapping_coercion(self):
        config = engine_config_from_mapping({
            "adaptation_lag": "3", "click_boost": "2.0", "ads_per_page": "3",
            "pool_diversity": "1.7", "prior_knowledge": "other:100",
            "seed": "0",
        })
        assert config.adaptation_lag == 3
        assert config.pool_diversity == 1.7

    def test_mapping_rejects_unknown_keys(self):
        with pytest.raises(ValidationError, match="unknown engine setting"):
            engine_config_from_mapping({"lag": "3"})

    def test_mapping_rejects_bad_types(self):
        with pytest.raises(ValidationError, match="adaptation_lag"):
            engine_config_from_mapping({"adaptation_lag": "2.5"})


class TestEnginePresets:
    def test_google_like(self):
        config = load_engine_config("google_like")
        assert config == EngineConfig(0, 2.0, 4, 3.3, "other:100", 0)

    def test_bing_like(self):
        config = load_engine_config("bing_like")
        assert config == EngineConfig(3, 2.0, 3, 1.7, "other:100", 0)

    def test_seed_override(self):
        assert load_engine_config("google_like", seed=99).seed == 99

    def test_unknown_name_is_usage_error(self):
        with pytest.raises(UsageError, match="no-such-engine"):
            load_engine_config("no-such-engine")

    def test_file_with_include_overrides(self, tmp_path):
        (tmp_path / "base.cfg").write_text(
            "adaptation_lag = 1\nads_per_page = 4\n", encoding="utf-8"
        )
        custom = tmp_path / "custom.cfg"
        custom.write_text("include base.cfg\nads_per_page = 2\n", encoding="utf-8")
        config = load_engine_config(custom)
        assert config.adaptation_lag == 1
        assert config.ads_per_page == 2


class TestDiversity:
    def test_closed_form_matches_enumeration(self):
        # Exact oracle: enumerate every draw sequence for small pools.
        for pool_size, draws in itertools.product(range(1, 5), range(1, 5)):
            total = Fraction(0)
            for seq in itertools.product(range(pool_size), repeat=draws):
                total += len(set(seq))
            exact = total / pool_size**draws
            assert abs(expected_distinct(pool_size, draws) - exact) < 1e-12

    def test_slice_for_broad_rotation(self):
        # Four draws from eight adverts average ~3.31 distinct.
        assert diversity_slice(8, 4, 3.3) == 8

    def test_slice_for_narrow_rotation(self):
        # Three draws from two adverts average 1.75 distinct.
        assert diversity_slice(8, 3, 1.7) == 2

    def test_ties_prefer_smaller_slices(self):
        # With a single draw every slice size yields exactly one distinct ad.
        assert diversity_slice(8, 1, 1.0) == 1

    @given(st.integers(1, 8), st.integers(1, 6), st.floats(0.5, 8.0))
    @settings(max_examples=80, deadline=None)
    def test_slice_always_in_pool(self, pool_size, draws, target):
        assert 1 <= diversity_slice(pool_size, draws, target) <= pool_size


class TestApportionment:
    def test_counts_sum_to_slots(self):
        weights = {"a": 0.3, "b": 1.1, "c": 0.02}
        counts = apportion_slots(weights, ("a", "b", "c"), 5)
        assert sum(counts.values()) == 5

    def test_dominant_weight_takes_every_slot(self):
        weights = {"other": 100 / 111} | {f"s{i}": 1 / 111 for i in range(11)}
        counts = apportion_slots(weights, tuple(weights), 4)
        assert counts["other"] == 4

    def test_remainder_tie_follows_category_order(self):
        weights = {"a": 1.0, "b": 1.0}
        assert apportion_slots(weights, ("a", "b"), 1) == {"a": 1, "b": 0}
        assert apportion_slots(weights, ("b", "a"), 1) == {"b": 1, "a": 0}

    def test_zero_total_rejected(self):
        with pytest.raises(ValidationError):
            apportion_slots({"a": 0.0}, ("a",), 3)

    @given(
        st.lists(st.floats(0.001, 50.0), min_size=1, max_size=8),
        st.integers(1, 10),
    )
    @settings(max_examples=100, deadline=None)
    def test_property_sums_and_floors(self, raw, slots):
        order = tuple(f"c{i}" for i in range(len(raw)))
        weights = dict(zip(order, raw))
        counts = apportion_slots(weights, order, slots)
        assert sum(counts.values()) == slots
        total = sum(raw)
        for label, weight in weights.items():
            assert counts[label] >= int(slots * weight / total)


class TestAdPools:
    def test_every_category_has_eight_adverts(self, pools, default_keywords):
        assert set(pools) == set(default_keywords) | {"other"}
        for pool in pools.values():
            assert len(pool) == 8

    def test_sensitive_adverts_carry_the_tail(self, pools):
        for label, pool in pools.items():
            if label == "other":
                continue
            for ad in pool:
                if ad not in SHARED_FINANCE_ADS:
                    assert ad.endswith(AD_TAIL), (label, ad)

    def test_related_finance_pools_share_generic_copy(self, pools):
        assert tuple(pools["payday"][5:]) == SHARED_FINANCE_ADS
        assert tuple(pools["bankrupt"][5:]) == SHARED_FINANCE_ADS

    def test_catchall_pool_is_one_term_multiset(self, pools):
        reference = Counter(filter_terms(pools["other"][0]))
        for ad in pools["other"]:
            assert Counter(filter_terms(ad)) == reference
        # Eight distinct surface strings nonetheless.
        assert len(set(pools["other"])) == 8

    def test_own_adverts_share_a_term_multiset_per_category(self, pools):
        for label, pool in pools.items():
            own = [ad for ad in pool if ad not in SHARED_FINANCE_ADS]
            reference = Counter(filter_terms(own[0]))
            for ad in own:
                assert Counter(filter_terms(ad)) == reference, label

    def test_catchall_collision_rejected(self):
        with pytest.raises(ValidationError, match="collides"):
            build_ad_pools({"other": ["x"]}, "other")

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValidationError):
            build_ad_pools({}, "other")
        with pytest.raises(ValidationError):
            build_ad_pools({"payday": []}, "other")


class TestLinks:
    def test_shape(self):
        links = links_for_query("prostate cancer")
        assert len(links) == LINKS_PER_PAGE
        for title, snippet in links:
            assert len(title.split()) == 3
            assert len(snippet.split()) == 5
            assert set(title.split()) | set(snippet.split()) <= set(LINK_WORDS)

    def test_rank_stable_per_query(self):
        assert links_for_query("payday loans") == links_for_query("payday loans")

    def test_queries_get_distinct_links(self):
        assert links_for_query("payday loans") != links_for_query("divorce")


class TestEngineServing:
    def test_uniform_belief_without_prior(self, pools, categories):
        engine = new_engine(google_config(prior_knowledge=""), pools, categories)
        belief = engine.belief()
        assert abs(sum(belief.values()) - 1.0) < 1e-12
        for weight in belief.values():
            assert abs(weight - 1 / 12) < 1e-12

    def test_prior_concentrates_belief(self, pools, categories):
        engine = new_engine(google_config(), pools, categories)
        belief = engine.belief()
        assert abs(belief["other"] - 100 / 111) < 1e-12
        assert abs(belief["prostate"] - 1 / 111) < 1e-12
        assert abs(sum(belief.values()) - 1.0) < 1e-12

    def test_prior_naming_unknown_category_rejected(self, pools, categories):
        config = google_config(prior_knowledge="shoes:5")
        with pytest.raises(ValidationError, match="shoes"):
            new_engine(config, pools, categories)

    def test_missing_pool_rejected(self, pools, categories):
        partial = {k: v for k, v in pools.items() if k != "divorce"}
        with pytest.raises(ValidationError, match="divorce"):
            new_engine(google_config(), partial, categories)

    def test_cold_page_is_pure_catchall(self, pools, categories):
        engine = new_engine(google_config(), pools, categories)
        page = engine.submit_query("symptoms and causes")
        assert composition(page, pools) == {"other": 4}

    def test_one_query_yields_two_topic_slots(self, pools, categories):
        engine = new_engine(google_config(), pools, categories)
        engine.submit_query("prostate cancer")
        page = engine.submit_query("symptoms and causes")
        assert composition(page, pools) == {"prostate": 2, "other": 2}

    def test_query_increment_is_exactly_one(self, pools, categories):
        engine = new_engine(google_config(), pools, categories)
        engine.submit_query("prostate cancer")
        engine.submit_query("prostate cancer")
        assert abs(engine.belief()["prostate"] - (1 / 111 + 2.0)) < 1e-12

    def test_click_doubles_weight(self, pools, categories):
        engine = new_engine(google_config(), pools, categories)
        engine.submit_query("prostate cancer")
        page = engine.submit_query("symptoms and causes")
        before = engine.belief()["prostate"]
        clicked = [
            ad.position for ad in page.adverts if ad.text in pools["prostate"]
        ]
        engine.register_click(clicked[0])
        assert abs(engine.belief()["prostate"] - 2 * before) < 1e-12

    def test_clicks_saturate_the_page(self, pools, categories):
        engine = new_engine(google_config(), pools, categories)
        engine.submit_query("prostate cancer")
        page = engine.submit_query("symptoms and causes")
        for step in ({"prostate": 3, "other": 1}, {"prostate": 4}):
            for ad in page.adverts:
                if ad.text in pools["prostate"]:
                    engine.register_click(ad.position)
            page = engine.submit_query("symptoms and causes")
            assert composition(page, pools) == step

    def test_probe_text_never_updates_belief(self, pools, categories):
        engine = new_engine(google_config(), pools, categories)
        before = engine.belief()
        for _ in range(6):
            engine.submit_query("symptoms and causes")
        assert engine.belief() == before

    def test_empty_query_is_inert(self, pools, categories):
        engine = new_engine(google_config(), pools, categories)
        before = engine.belief()
        engine.submit_query("the of and")
        assert engine.belief() == before

    def test_shared_wording_updates_both_finance_categories(
        self, pools, categories
    ):
        engine = new_engine(google_config(), pools, categories)
        engine.submit_query("payday advice")
        belief = engine.belief()
        assert belief["payday"] > 1.0
        # "advice" also sits in the gambling support vocabulary.
        assert belief["gambling"] > 1.0
        assert abs(belief["prostate"] - 1 / 111) < 1e-12

    @pytest.mark.parametrize("lag", [0, 1, 2, 3])
    def test_adaptation_lag_delays_first_topic_advert(
        self, pools, categories, lag
    ):
        engine = new_engine(google_config(adaptation_lag=lag), pools, categories)
        first_mixed = None
        for page_number in range(1, 10):
            page = engine.submit_query("divorce separation")
            if composition(page, pools) != {"other": 4}:
                first_mixed = page_number
                break
        assert first_mixed == lag + 2

    def test_click_update_obeys_the_same_lag(self, pools, categories):
        engine = new_engine(google_config(adaptation_lag=1), pools, categories)
        compositions = []
        page = engine.submit_query("divorce separation")
        for _ in range(6):
            for ad in page.adverts:
                if ad.text in pools["divorce"]:
                    engine.register_click(ad.position)
            page = engine.submit_query("divorce separation")
            compositions.append(composition(page, pools)["divorce"])
        # Pages: cold, cold (lag), 2 slots, then clicks compound two pages on.
        assert compositions[0] == 0
        assert compositions[1] == 2
        assert compositions[-1] == 4

    def test_same_seed_reproduces_the_session(self, pools, categories):
        def run():
            engine = new_engine(google_config(seed=42), pools, categories)
            pages = []
            for query in ("symptoms and causes", "payday cheap",
                          "payday advice", "symptoms and causes"):
                page = engine.submit_query(query)
                for ad in page.adverts:
                    if ad.text in pools["payday"]:
                        engine.register_click(ad.position)
                pages.append((tuple(ad.text for ad in page.adverts), page.links))
            return pages

        assert run() == run()

    def test_links_stay_fixed_while_adverts_adapt(self, pools, categories):
        engine = new_engine(google_config(), pools, categories)
        cold = engine.submit_query("bankrupt insolvency")
        for _ in range(5):
            engine.submit_query("bankrupt insolvency")
        warm = engine.submit_query("bankrupt insolvency")
        assert cold.links == warm.links
        assert composition(cold, pools) != composition(warm, pools)

    def test_narrow_slice_excludes_shared_copy(self, pools, categories):
        config = EngineConfig(3, 2.0, 3, 1.7, "other:100", 7)
        engine = new_engine(config, pools, categories)
        assert engine.advert_slice("payday") == tuple(pools["payday"][:2])
        assert not set(engine.advert_slice("payday")) & set(SHARED_FINANCE_ADS)

    def test_broad_slice_keeps_whole_pool(self, pools, categories):
        engine = new_engine(google_config(), pools, categories)
        assert engine.advert_slice("payday") == tuple(pools["payday"])

    def test_clicks_need_a_served_page(self, pools, categories):
        engine = new_engine(google_config(), pools, categories)
        with pytest.raises(ValidationError, match="before any page"):
            engine.register_click(0)
        engine.submit_query("symptoms and causes")
        with pytest.raises(ValidationError, match="out of range"):
            engine.register_click(4)

    def test_advert_positions_are_dense(self, pools, categories):
        engine = new_engine(google_config(), pools, categories)
        page = engine.submit_query("anything at all")
        assert [ad.position for ad in page.adverts] == [0, 1, 2, 3]

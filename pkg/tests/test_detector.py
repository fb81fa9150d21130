"""Interval calibration, probe/session verdicts, confusion and lag stats."""

from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pri.corpus import Advert, CategorySet, Interaction, ResultPage, SessionTrace
from pri.detector import (
    DetectorConfig,
    LagStatistics,
    ProbeVerdict,
    SessionVerdict,
    TopicBaseline,
    baselines_from_samples,
    calibrate,
    classify_probe,
    confusion_matrix,
    detect_session,
    detection_rates,
    epsilon_violation,
    lag_statistics,
    parse_baselines,
    write_baselines,
)
from pri.errors import ValidationError
from pri.estimator import ScoreVector, train


def _vector(catchall_value, step=1, **topic_values):
    scores = {"other": F(catchall_value)}
    scores.update({k: F(v) for k, v in topic_values.items()})
    return ScoreVector(step=step, scores=scores)


def _baseline(**stats):
    samples = {topic: values for topic, values in stats.items()}
    return baselines_from_samples(samples, catchall="other")


class TestCalibration:
    def test_two_point_formula(self):
        baseline = baselines_from_samples(
            {"gambling": [0.2, 0.4], "other": [0.0, 0.0]}, catchall="other"
        )
        stats = baseline.per_topic["gambling"]
        assert stats.mean == pytest.approx(0.3)
        assert stats.sigma == pytest.approx(math.sqrt(0.02))
        assert stats.count == 2

    def test_constant_samples_degenerate_interval(self):
        baseline = _baseline(gambling=[0.5, 0.5, 0.5], other=[0.1, 0.1])
        lo, hi = baseline.interval("gambling", 3.0)
        assert lo == hi == 0.5

    def test_too_few_samples_names_category(self):
        with pytest.raises(ValidationError, match="gambling"):
            baselines_from_samples({"gambling": [0.5], "other": [0.1, 0.2]},
                                   catchall="other")

    def test_calibrate_uses_probe_steps_of_matching_topic(self, golden_categories,
                                                          golden_corpus):
        model = train(golden_corpus, golden_categories)

        def page(*texts):
            return ResultPage(links=(), adverts=tuple(
                Advert(t, i) for i, t in enumerate(texts)))

        def trace(sid, topic, probe_pages):
            interactions = []
            step = 1
            for texts in probe_pages:
                interactions.append(
                    Interaction(step, "user query", page("prostate cancer"), (), False))
                step += 1
                interactions.append(
                    Interaction(step, "probe", page(*texts), (), True))
                step += 1
            return SessionTrace(sid, topic, tuple(interactions))

        traces = [
            trace("t-prostate-0", "prostate",
                  [("prostate cancer",), ("prostate cancer sufferers treated",)]),
            trace("t-other-0", "other",
                  [("discover lifetime risk of diabetes",), ("diabetes",)]),
        ]
        baseline = calibrate(model, traces)
        assert baseline.per_topic["prostate"].count == 2
        assert baseline.per_topic["other"].count == 2
        # Hand-scored probe pages: {1.0, 0.8} and {0.9, 1.0}.  User-step pages
        # (all "prostate cancer", scoring 1.0) must not enter either mean.
        assert baseline.per_topic["prostate"].mean == pytest.approx(0.9)
        assert baseline.per_topic["other"].mean == pytest.approx(0.95)

    def test_calibrate_missing_category_errors(self, golden_categories,
                                               golden_corpus):
        model = train(golden_corpus, golden_categories)
        with pytest.raises(ValidationError, match="prostate"):
            calibrate(model, [])


class TestProbeClassification:
    def test_flag_above_interval(self):
        baseline = _baseline(other=[0.4, 0.5, 0.6], gambling=[0.2, 0.3, 0.4])
        verdict = classify_probe(_vector("0.9"), baseline, DetectorConfig())
        assert verdict.sensitive_flag

    def test_at_mean_not_flagged(self):
        baseline = _baseline(other=[0.4, 0.5, 0.6], gambling=[0.2, 0.3, 0.4])
        verdict = classify_probe(_vector("0.5"), baseline, DetectorConfig())
        assert not verdict.sensitive_flag
        assert verdict.detected_topics == ()

    def test_boundary_counts_as_inside(self):
        baseline = _baseline(other=[0.4, 0.5, 0.6])
        lo, hi = baseline.interval("other", 3.0)
        for edge in (lo, hi):
            verdict = classify_probe(_vector(repr(edge)), baseline,
                                     DetectorConfig())
            assert not verdict.sensitive_flag

    def test_two_condition_detection(self):
        baseline = _baseline(other=[0.4, 0.5, 0.6], gambling=[0.25, 0.3, 0.35])
        verdict = classify_probe(
            _vector("0.9", gambling="0.3"), baseline, DetectorConfig())
        assert verdict.sensitive_flag
        assert "gambling" in verdict.detected_topics

    def test_no_detection_without_flag(self):
        baseline = _baseline(other=[0.4, 0.5, 0.6], gambling=[0.25, 0.3, 0.35])
        verdict = classify_probe(
            _vector("0.5", gambling="0.3"), baseline, DetectorConfig())
        assert verdict.detected_topics == ()

    def test_verdict_invariant_detected_implies_flag(self):
        baseline = _baseline(other=[0.4, 0.5, 0.6], gambling=[0.25, 0.3, 0.35])
        for value in ("0.1", "0.3", "0.5", "0.7", "0.9"):
            verdict = classify_probe(
                _vector(value, gambling="0.3"), baseline, DetectorConfig())
            assert not verdict.detected_topics or verdict.sensitive_flag

    @given(st.floats(3.0, 10.0), st.floats(0.0, 1.5))
    @settings(max_examples=60, deadline=None)
    def test_enlarging_multiplier_never_creates_flags(self, bigger, value):
        baseline = _baseline(other=[0.4, 0.5, 0.6])
        small = classify_probe(_vector(repr(value)), baseline,
                               DetectorConfig(sigma_multiplier=3.0))
        large = classify_probe(_vector(repr(value)), baseline,
                               DetectorConfig(sigma_multiplier=bigger))
        if large.sensitive_flag:
            assert small.sensitive_flag


class TestSessionRule:
    def _verdicts(self, flags, topics=None):
        return [
            ProbeVerdict(step=i + 1, sensitive_flag=f,
                         detected_topics=tuple(topics or ()) if f else ())
            for i, f in enumerate(flags)
        ]

    def test_any_flag_detects(self):
        verdicts = self._verdicts([False, True, False, False, False])
        assert detect_session(verdicts, DetectorConfig()).sensitive

    def test_all_clear(self):
        verdicts = self._verdicts([False] * 5)
        assert not detect_session(verdicts, DetectorConfig()).sensitive

    def test_topic_multiset(self):
        verdicts = self._verdicts([True] * 5, topics=["payday"])
        session = detect_session(verdicts, DetectorConfig())
        assert session.topics == Counter({"payday": 5})

    def test_excess_probes_ignored(self):
        verdicts = self._verdicts([False] * 5 + [True])
        assert not detect_session(verdicts, DetectorConfig()).sensitive

    def test_incomplete_session_rejected(self):
        with pytest.raises(ValidationError, match="incomplete"):
            detect_session(self._verdicts([True] * 4), DetectorConfig())

    @given(st.lists(st.booleans(), min_size=5, max_size=9), st.randoms())
    @settings(max_examples=60, deadline=None)
    def test_or_of_first_five_and_permutation_invariance(self, flags, rng):
        verdicts = self._verdicts(flags)
        session = detect_session(verdicts, DetectorConfig())
        assert session.sensitive == any(flags[:5])
        head = verdicts[:5]
        rng.shuffle(head)
        for i, v in enumerate(head):
            head[i] = ProbeVerdict(i + 1, v.sensitive_flag, v.detected_topics)
        shuffled = detect_session(head, DetectorConfig())
        assert shuffled.sensitive == session.sensitive


class TestEpsilonRule:
    def test_worked_threshold(self):
        scores = _vector("0.08", prostate="8/25")
        config = DetectorConfig(epsilon=math.log(0.3))
        assert epsilon_violation(scores, config) == {"prostate"}

    def test_larger_epsilon_clears(self):
        scores = _vector("0.08", prostate="8/25")
        config = DetectorConfig(epsilon=math.log(0.5))
        assert epsilon_violation(scores, config) == set()

    def test_huge_epsilon_always_clears(self):
        scores = _vector("0.9", prostate="100")
        assert epsilon_violation(scores, DetectorConfig(epsilon=50.0)) == set()

    def test_epsilon_unset_rejected(self):
        with pytest.raises(ValidationError, match="epsilon"):
            epsilon_violation(_vector("0.1"), DetectorConfig())

    def test_catchall_not_reported(self):
        scores = _vector("5", prostate="0")
        config = DetectorConfig(epsilon=0.0)
        assert epsilon_violation(scores, config) == set()


def _session(topic_detected: bool, flag=True, topic="gambling"):
    topics = Counter({topic: 1}) if topic_detected else Counter()
    return SessionVerdict(sensitive=flag, topics=topics)


class TestConfusion:
    def test_perfect_diagonal(self):
        verdicts = [_session(True, topic="gambling"),
                    _session(True, topic="payday")]
        truths = ["gambling", "payday"]
        matrix = confusion_matrix(verdicts, truths, ("gambling", "payday"))
        for topic in ("gambling", "payday"):
            row = matrix.rows[topic]
            assert row.true_detect == 1.0
            assert row.false_other == 0.0
            assert row.true_other == 1.0
            assert row.false_detect == 0.0

    def test_misdetection_bookkeeping(self):
        verdicts = [SessionVerdict(True, Counter({"payday": 1}))]
        truths = ["gambling"]
        matrix = confusion_matrix(verdicts, truths, ("gambling", "payday"))
        assert matrix.rows["gambling"].false_other == 1.0
        assert matrix.rows["payday"].false_detect == 1.0

    def test_rows_sum_to_one_exactly(self):
        verdicts = [
            SessionVerdict(True, Counter({"payday": 2})),
            SessionVerdict(True, Counter()),
            SessionVerdict(False, Counter()),
            SessionVerdict(True, Counter({"gambling": 1, "payday": 1})),
        ]
        truths = ["payday", "payday", "gambling", "gambling"]
        matrix = confusion_matrix(verdicts, truths, ("gambling", "payday"))
        for row in matrix.rows.values():
            assert row.true_detect + row.false_other == 1.0
            assert row.true_other + row.false_detect == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            confusion_matrix([], [], ("gambling",))

    def test_session_level_rates(self):
        verdicts = [_session(True), _session(False, flag=False),
                    SessionVerdict(True, Counter()), SessionVerdict(False, Counter())]
        truths = ["gambling", "gambling", "other", "other"]
        sensitive_rate, false_positive = detection_rates(verdicts, truths, "other")
        assert sensitive_rate == 0.5
        assert false_positive == 0.5


class TestLagStatistics:
    def _verdict(self, wrong, topic="gambling"):
        # wrong=True models a missed sensitive probe (no flag).
        if wrong:
            return ProbeVerdict(1, False, ())
        return ProbeVerdict(1, True, (topic,))

    def test_single_run(self):
        probes = [[self._verdict(True), self._verdict(True),
                   self._verdict(False), self._verdict(False),
                   self._verdict(False)]]
        stats = lag_statistics(probes, ["gambling"], catchall="other")
        assert stats.run_length_dist == {2: 1.0}
        assert stats.first_error_dist == {1: 1.0}
        assert stats.expected_run == 2.0

    def test_no_errors(self):
        probes = [[self._verdict(False)] * 5]
        stats = lag_statistics(probes, ["gambling"], catchall="other")
        assert stats.run_length_dist == {}
        assert stats.expected_run is None

    def test_catchall_sessions_err_when_flagged(self):
        flagged = ProbeVerdict(1, True, ())
        clear = ProbeVerdict(1, False, ())
        stats = lag_statistics([[clear, flagged, clear, clear, clear]],
                               ["other"], catchall="other")
        assert stats.run_length_dist == {1: 1.0}
        assert stats.first_error_dist == {2: 1.0}

    def test_multiple_runs_in_one_session(self):
        v = self._verdict
        probes = [[v(True), v(False), v(True), v(True), v(False)]]
        stats = lag_statistics(probes, ["gambling"], catchall="other")
        assert stats.run_length_dist == {1: 0.5, 2: 0.5}
        assert stats.expected_run == 1.5
        assert stats.first_error_dist == {1: 1.0}

    def test_distributions_sum_to_one(self):
        v = self._verdict
        probes = [
            [v(True), v(False), v(False), v(False), v(False)],
            [v(True), v(True), v(False), v(False), v(False)],
            [v(False)] * 5,
        ]
        stats = lag_statistics(probes, ["gambling", "gambling", "gambling"],
                               catchall="other")
        assert sum(stats.run_length_dist.values()) == pytest.approx(1.0)
        assert sum(stats.first_error_dist.values()) == pytest.approx(1.0)
        assert stats.expected_run == pytest.approx(1.5)
        assert stats.expected_run >= 1.0


class TestBaselinePersistence:
    def test_round_trip(self, tmp_path):
        baseline = _baseline(other=[0.4, 0.5, 0.6], gambling=[0.2, 0.3, 0.4])
        from io import StringIO

        out = StringIO()
        write_baselines(baseline, out)
        text = out.getvalue()
        assert text.startswith("#pri-baselines v1\n")
        reparsed = parse_baselines(text.splitlines())
        assert reparsed == baseline

    def test_bad_header(self):
        with pytest.raises(ValidationError):
            parse_baselines(["#pri-baselines v2"])


class TestConfigValidation:
    def test_negative_epsilon_allowed(self):
        DetectorConfig(epsilon=math.log(0.3))

    def test_bad_multiplier_rejected(self):
        with pytest.raises(ValidationError):
            DetectorConfig(sigma_multiplier=0.0)

    def test_bad_probe_count_rejected(self):
        with pytest.raises(ValidationError):
            DetectorConfig(session_probe_count=0)

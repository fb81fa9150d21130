"""Confidence-interval detection over probe scores, plus campaign metrics.

Calibration collects, per topic, the score that topic's own training sessions
produce at probe steps, and summarizes it as mean and sample standard
deviation.  A probe is "sensitive" when the catch-all score leaves its
interval; a topic is detected when, additionally, that topic's score lies
inside its own interval.  A session is sensitive when any of its first
`session_probe_count` probes is.
"""

from __future__ import annotations

import math
import statistics
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from .corpus import SessionTrace
from .errors import ValidationError
from .estimator import PriModel, ScoreVector, score

BASELINES_HEADER = "#pri-baselines v1"


@dataclass(frozen=True)
class DetectorConfig:
    epsilon: float | None = None
    sigma_multiplier: float = 3.0
    session_probe_count: int = 5

    def __post_init__(self) -> None:
        if self.sigma_multiplier <= 0:
            raise ValidationError("sigma_multiplier must be positive")
        if self.session_probe_count <= 0:
            raise ValidationError("session_probe_count must be positive")


@dataclass(frozen=True)
class IntervalStats:
    mean: float
    sigma: float
    count: int


@dataclass(frozen=True)
class TopicBaseline:
    per_topic: dict[str, IntervalStats]
    catchall: str

    def interval(self, topic: str, multiplier: float) -> tuple[float, float]:
        stats = self.per_topic[topic]
        return (stats.mean - multiplier * stats.sigma,
                stats.mean + multiplier * stats.sigma)

    def contains(self, topic: str, value: float, multiplier: float) -> bool:
        lo, hi = self.interval(topic, multiplier)
        return lo <= value <= hi


@dataclass(frozen=True)
class ProbeVerdict:
    step: int
    sensitive_flag: bool
    detected_topics: tuple[str, ...]


@dataclass(frozen=True)
class SessionVerdict:
    sensitive: bool
    topics: Counter = field(default_factory=Counter)


@dataclass(frozen=True)
class ConfusionRow:
    true_detect: float
    false_other: float
    true_other: float
    false_detect: float


@dataclass(frozen=True)
class ConfusionMatrix:
    rows: dict[str, ConfusionRow]


@dataclass(frozen=True)
class LagStatistics:
    run_length_dist: dict[int, float]
    first_error_dist: dict[int, float]
    expected_run: float | None


def baselines_from_samples(
    samples: Mapping[str, Sequence[float]], catchall: str
) -> TopicBaseline:
    """Summarize per-topic score samples; every topic needs >= 2 of them."""
    short = sorted(t for t, values in samples.items() if len(values) < 2)
    if short:
        raise ValidationError(
            "not enough probe samples to calibrate: " + ", ".join(short)
        )
    per_topic = {
        topic: IntervalStats(
            mean=statistics.fmean(values),
            sigma=statistics.stdev(values),
            count=len(values),
        )
        for topic, values in samples.items()
    }
    return TopicBaseline(per_topic=per_topic, catchall=catchall)


def calibrate(model: PriModel, training_traces: Iterable[SessionTrace]) -> TopicBaseline:
    """Per-topic interval statistics from probe-step scores of own-topic runs."""
    samples: dict[str, list[float]] = {c: [] for c in model.categories.all_labels}
    for trace in training_traces:
        if trace.topic_label not in samples:
            raise ValidationError(
                f"session {trace.session_id}: unknown topic {trace.topic_label!r}"
            )
        for probe in trace.probes:
            vector = score(model, probe.page.adverts, step=probe.step)
            samples[trace.topic_label].append(float(vector.scores[trace.topic_label]))
    return baselines_from_samples(samples, catchall=model.categories.catchall)


def classify_probe(
    scores: ScoreVector, baseline: TopicBaseline, config: DetectorConfig
) -> ProbeVerdict:
    m = config.sigma_multiplier
    if baseline.catchall not in scores.scores:
        raise ValidationError(f"scores lack the catch-all {baseline.catchall!r}")
    if baseline.catchall not in baseline.per_topic:
        raise ValidationError(f"baseline lacks the catch-all {baseline.catchall!r}")
    catchall_value = float(scores.scores[baseline.catchall])
    flag = not baseline.contains(baseline.catchall, catchall_value, m)
    detected: tuple[str, ...] = ()
    if flag:
        detected = tuple(
            topic
            for topic, value in scores.scores.items()
            if topic != baseline.catchall
            and topic in baseline.per_topic
            and baseline.contains(topic, float(value), m)
        )
    return ProbeVerdict(step=scores.step, sensitive_flag=flag,
                        detected_topics=detected)


def detect_session(
    verdicts: Sequence[ProbeVerdict], config: DetectorConfig
) -> SessionVerdict:
    n = config.session_probe_count
    if len(verdicts) < n:
        raise ValidationError(
            f"incomplete session: {len(verdicts)} probe verdicts, need {n}"
        )
    head = verdicts[:n]
    topics: Counter = Counter()
    for verdict in head:
        topics.update(verdict.detected_topics)
    return SessionVerdict(sensitive=any(v.sensitive_flag for v in head),
                          topics=topics)


def epsilon_violation(
    scores: ScoreVector, config: DetectorConfig, catchall: str = "other"
) -> set[str]:
    """Sensitive categories whose score exceeds e^epsilon (strictly)."""
    if config.epsilon is None:
        raise ValidationError("epsilon is not set in the detector config")
    threshold = math.exp(config.epsilon)
    return {
        topic
        for topic, value in scores.scores.items()
        if topic != catchall and float(value) > threshold
    }


def confusion_matrix(
    session_verdicts: Sequence[SessionVerdict],
    ground_truth: Sequence[str],
    topics: Sequence[str],
) -> ConfusionMatrix:
    if not session_verdicts or len(session_verdicts) != len(ground_truth):
        raise ValidationError("need aligned, nonempty verdicts and ground truth")
    rows: dict[str, ConfusionRow] = {}
    for topic in topics:
        own = [v for v, t in zip(session_verdicts, ground_truth) if t == topic]
        rest = [v for v, t in zip(session_verdicts, ground_truth) if t != topic]
        detected_own = sum(1 for v in own if v.topics.get(topic, 0) > 0)
        detected_rest = sum(1 for v in rest if v.topics.get(topic, 0) > 0)
        true_detect = detected_own / len(own) if own else 0.0
        false_detect = detected_rest / len(rest) if rest else 0.0
        rows[topic] = ConfusionRow(
            true_detect=true_detect,
            false_other=1.0 - true_detect,
            true_other=1.0 - false_detect,
            false_detect=false_detect,
        )
    return ConfusionMatrix(rows=rows)


def detection_rates(
    session_verdicts: Sequence[SessionVerdict],
    ground_truth: Sequence[str],
    catchall: str,
) -> tuple[float, float]:
    """(sensitive-session detection rate, catchall false-positive rate)."""
    sensitive = [v for v, t in zip(session_verdicts, ground_truth) if t != catchall]
    catchalls = [v for v, t in zip(session_verdicts, ground_truth) if t == catchall]
    rate = (sum(1 for v in sensitive if v.sensitive) / len(sensitive)
            if sensitive else 0.0)
    false_positive = (sum(1 for v in catchalls if v.sensitive) / len(catchalls)
                      if catchalls else 0.0)
    return rate, false_positive


def probe_misclassified(verdict: ProbeVerdict, truth: str, catchall: str) -> bool:
    if truth == catchall:
        return verdict.sensitive_flag
    return not (verdict.sensitive_flag and truth in verdict.detected_topics)


def lag_statistics(
    probe_verdicts_per_session: Sequence[Sequence[ProbeVerdict]],
    ground_truth: Sequence[str],
    catchall: str,
) -> LagStatistics:
    """Run lengths of consecutive misclassified probes, and first-error index."""
    runs: list[int] = []
    first_errors: list[int] = []
    for verdicts, truth in zip(probe_verdicts_per_session, ground_truth):
        current = 0
        first: int | None = None
        for i, verdict in enumerate(verdicts, start=1):
            if probe_misclassified(verdict, truth, catchall):
                current += 1
                if first is None:
                    first = i
            elif current:
                runs.append(current)
                current = 0
        if current:
            runs.append(current)
        if first is not None:
            first_errors.append(first)

    def distribution(values: list[int]) -> dict[int, float]:
        counts = Counter(values)
        total = len(values)
        return {k: counts[k] / total for k in sorted(counts)}

    return LagStatistics(
        run_length_dist=distribution(runs),
        first_error_dist=distribution(first_errors),
        expected_run=statistics.fmean(runs) if runs else None,
    )


# ---------------------------------------------------------------------------
# baselines file
# ---------------------------------------------------------------------------


def write_baselines(baseline: TopicBaseline, out: IO[str]) -> None:
    out.write(BASELINES_HEADER + "\n")
    out.write(f"catchall\t{baseline.catchall}\n")
    for topic in sorted(baseline.per_topic):
        stats = baseline.per_topic[topic]
        out.write(f"{topic}\t{stats.mean!r}\t{stats.sigma!r}\t{stats.count}\n")


def save_baselines(baseline: TopicBaseline, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_baselines(baseline, fh)


def parse_baselines(lines: Iterable[str]) -> TopicBaseline:
    it = iter(lines)
    try:
        header = next(it).rstrip("\n")
    except StopIteration:
        raise ValidationError("empty baselines file") from None
    if header != BASELINES_HEADER:
        raise ValidationError(f"unsupported baselines header {header!r}")
    catchall = "other"
    per_topic: dict[str, IntervalStats] = {}
    for lineno, raw in enumerate(it, start=2):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if fields[0] == "catchall" and len(fields) == 2:
            catchall = fields[1]
            continue
        if len(fields) != 4:
            raise ValidationError(f"baselines line {lineno}: malformed record")
        try:
            per_topic[fields[0]] = IntervalStats(
                mean=float(fields[1]), sigma=float(fields[2]), count=int(fields[3])
            )
        except ValueError as exc:
            raise ValidationError(f"baselines line {lineno}: {exc}") from exc
    return TopicBaseline(per_topic=per_topic, catchall=catchall)


def load_baselines(path: str | Path) -> TopicBaseline:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read baselines {path}: {exc}") from exc
    return parse_baselines(lines)

"""Turn campaign results into files and readable tables.

Everything here is formatting: the numbers are computed elsewhere and this
module only decides how they appear on disk.  All output is deterministic --
fixed ordering, floats via repr(), no timestamps -- so rerunning a campaign
with the same seed produces byte-identical artifacts.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from io import StringIO
from pathlib import Path
from typing import Iterable

from .corpus import SessionTrace, save_capture
from .detector import (
    DetectorConfig,
    LagStatistics,
    ProbeVerdict,
    SessionVerdict,
    TopicBaseline,
    classify_probe,
    confusion_matrix,
    detect_session,
    detection_rates,
    lag_statistics,
    save_baselines,
)
from .estimator import PriModel, save_model
from .runner import CampaignResult, score_probes

BUNDLE_FILES = (
    "model.txt",
    "baselines.txt",
    "train.capture",
    "test.capture",
    "sessions.csv",
    "confusion.csv",
    "heatmap.csv",
    "lag.csv",
    "summary.md",
)


# ---------------------------------------------------------------------------
# evaluation: capture -> verdicts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Evaluation:
    """Detection verdicts for a set of sessions, ready to format."""

    catchall: str
    truths: dict[str, str]
    probe_verdicts: dict[str, tuple[ProbeVerdict, ...]]
    session_verdicts: dict[str, SessionVerdict]

    @property
    def session_ids(self) -> tuple[str, ...]:
        return tuple(self.truths)

    def topics(self) -> tuple[str, ...]:
        seen = sorted(set(self.truths.values()) - {self.catchall})
        return tuple(seen)

    def rates(self) -> tuple[float, float]:
        ids = self.session_ids
        return detection_rates(
            [self.session_verdicts[s] for s in ids],
            [self.truths[s] for s in ids],
            self.catchall,
        )

    def confusion(self):
        ids = self.session_ids
        return confusion_matrix(
            [self.session_verdicts[s] for s in ids],
            [self.truths[s] for s in ids],
            self.topics(),
        )

    def lag(self) -> LagStatistics:
        ids = self.session_ids
        return lag_statistics(
            [self.probe_verdicts[s] for s in ids],
            [self.truths[s] for s in ids],
            self.catchall,
        )


def evaluate_capture(
    model: PriModel,
    baseline: TopicBaseline,
    traces: Iterable[SessionTrace],
    config: DetectorConfig | None = None,
    catchall: str = "other",
) -> Evaluation:
    """Classify every probe in the traces and aggregate session verdicts."""
    config = config or DetectorConfig()
    truths: dict[str, str] = {}
    probe_verdicts: dict[str, tuple[ProbeVerdict, ...]] = {}
    session_verdicts: dict[str, SessionVerdict] = {}
    for trace in traces:
        verdicts = tuple(
            classify_probe(vector, baseline, config)
            for vector in score_probes(model, trace)
        )
        truths[trace.session_id] = trace.topic_label
        probe_verdicts[trace.session_id] = verdicts
        session_verdicts[trace.session_id] = detect_session(verdicts, config)
    return Evaluation(catchall, truths, probe_verdicts, session_verdicts)


def campaign_evaluation(result: CampaignResult) -> Evaluation:
    """The test-split verdicts of a finished campaign, as an Evaluation."""
    return Evaluation(
        catchall=result.config.catchall,
        truths=dict(result.truths),
        probe_verdicts=dict(result.probe_verdicts),
        session_verdicts=dict(result.session_verdicts),
    )


# ---------------------------------------------------------------------------
# the topic-by-topic score matrix
# ---------------------------------------------------------------------------

def topic_score_matrix(result: CampaignResult) -> dict[str, dict[str, float]]:
    """Mean probe score of each category, grouped by true session topic.

    Rows are the sensitive topics a test session was about; columns are the
    sensitive categories the model scored.  The diagonal dominating its row
    is the model working; which off-diagonal cells stay warm shows which
    topic pairs share advertising vocabulary.
    """
    topics = result.config.categories.sensitive
    sums: dict[str, Counter] = {t: Counter() for t in topics}
    counts: dict[str, int] = {t: 0 for t in topics}
    for sid, vectors in result.probe_scores.items():
        truth = result.truths[sid]
        if truth not in sums:
            continue
        for vector in vectors:
            counts[truth] += 1
            for category in topics:
                sums[truth][category] += vector.scores[category]
    matrix: dict[str, dict[str, float]] = {}
    for topic in topics:
        if not counts[topic]:
            raise ValueError(f"no probe scores for topic {topic!r}")
        matrix[topic] = {
            category: float(Fraction(sums[topic][category]) / counts[topic])
            for category in topics
        }
    return matrix


# ---------------------------------------------------------------------------
# report rendering (the `report` command and summary.md)
# ---------------------------------------------------------------------------

def _percent(value: float) -> str:
    return f"{100.0 * value:.1f}%"


def render_text(evaluation: Evaluation) -> str:
    """Aligned, human-readable detection report."""
    sensitive_rate, false_positive = evaluation.rates()
    truths = list(evaluation.truths.values())
    n_catchall = sum(1 for t in truths if t == evaluation.catchall)
    lines = [
        "Detection summary",
        "-----------------",
        f"sessions scored:          {len(truths)}"
        f" ({len(truths) - n_catchall} sensitive, {n_catchall} catch-all)",
        f"sensitive detection rate: {_percent(sensitive_rate)}",
        f"false positive rate:      {_percent(false_positive)}",
        "",
        "Per-topic session rates",
        "-----------------------",
    ]
    confusion = evaluation.confusion()
    width = max((len(t) for t in confusion.rows), default=5)
    header = (f"{'topic':<{width}}  true detect  false other"
              "   true other  false detect")
    lines.append(header)
    for topic, row in confusion.rows.items():
        lines.append(
            f"{topic:<{width}}  {_percent(row.true_detect):>11}"
            f"  {_percent(row.false_other):>11}  {_percent(row.true_other):>11}"
            f"  {_percent(row.false_detect):>12}"
        )
    lag = evaluation.lag()
    lines += ["", "Misclassification lag", "---------------------"]
    if lag.expected_run is None:
        lines.append("no misclassified probes: run statistics empty")
    else:
        lines.append(f"expected run length E[X]: {lag.expected_run:.2f}")
        runs = "  ".join(f"{k}: {_percent(p)}"
                         for k, p in lag.run_length_dist.items())
        firsts = "  ".join(f"{k}: {_percent(p)}"
                           for k, p in lag.first_error_dist.items())
        lines.append(f"run length distribution:  {runs}")
        lines.append(f"first-error distribution: {firsts}")
    return "\n".join(lines) + "\n"


def render_csv(evaluation: Evaluation) -> str:
    """The same report as render_text, as one long-format CSV."""
    sensitive_rate, false_positive = evaluation.rates()
    truths = list(evaluation.truths.values())
    out = StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("table", "row", "column", "value"))
    n_catchall = sum(1 for t in truths if t == evaluation.catchall)
    writer.writerow(("summary", "sessions", "sensitive",
                     len(truths) - n_catchall))
    writer.writerow(("summary", "sessions", "catchall", n_catchall))
    writer.writerow(("summary", "rate", "sensitive_detection",
                     repr(sensitive_rate)))
    writer.writerow(("summary", "rate", "false_positive",
                     repr(false_positive)))
    for topic, row in evaluation.confusion().rows.items():
        writer.writerow(("confusion", topic, "true_detect",
                         repr(row.true_detect)))
        writer.writerow(("confusion", topic, "false_other",
                         repr(row.false_other)))
        writer.writerow(("confusion", topic, "true_other",
                         repr(row.true_other)))
        writer.writerow(("confusion", topic, "false_detect",
                         repr(row.false_detect)))
    lag = evaluation.lag()
    for k, p in lag.run_length_dist.items():
        writer.writerow(("lag", "run_length", k, repr(p)))
    for k, p in lag.first_error_dist.items():
        writer.writerow(("lag", "first_error", k, repr(p)))
    writer.writerow(("lag", "expected_run", "",
                     "" if lag.expected_run is None else repr(lag.expected_run)))
    return out.getvalue()


def render_detections(evaluation: Evaluation) -> str:
    """Per-session verdict CSV: what was flagged and as which topics."""
    out = StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("session", "topic", "sensitive", "detected_topics"))
    for sid in evaluation.session_ids:
        verdict = evaluation.session_verdicts[sid]
        detected = ";".join(sorted(verdict.topics))
        writer.writerow((sid, evaluation.truths[sid],
                         int(verdict.sensitive), detected))
    return out.getvalue()


# ---------------------------------------------------------------------------
# campaign bundle
# ---------------------------------------------------------------------------

def _summary_markdown(result: CampaignResult) -> str:
    config = result.config
    engine = config.engine
    topics = config.categories.sensitive
    lag = result.lag
    lines = [
        "# Campaign report",
        "",
        "## Setup",
        "",
        f"- master seed: {result.master_seed}",
        f"- topics: {len(topics)} sensitive + catch-all `{config.catchall}`",
        f"- sessions per topic: {config.train_sessions_per_topic} training,"
        f" {config.test_sessions_per_topic} test",
        f"- probe query: `{config.probe}`",
        f"- user clicks: {'on' if config.clicks_enabled else 'off'}",
        f"- engine: adaptation_lag={engine.adaptation_lag},"
        f" click_boost={engine.click_boost}, ads_per_page={engine.ads_per_page},"
        f" pool_diversity={engine.pool_diversity}",
        f"- detector: sigma_multiplier={config.detector.sigma_multiplier},"
        f" session_probe_count={config.detector.session_probe_count}",
        "",
        "## Headline rates",
        "",
        f"- sensitive-session detection rate: {_percent(result.sensitive_rate)}",
        f"- catch-all false positive rate: {_percent(result.false_positive_rate)}",
        "",
        "## Per-topic session rates",
        "",
        "| topic | true detect | false other | true other | false detect |",
        "| --- | --- | --- | --- | --- |",
    ]
    for topic, row in result.confusion.rows.items():
        lines.append(
            f"| {topic} | {_percent(row.true_detect)} | {_percent(row.false_other)}"
            f" | {_percent(row.true_other)} | {_percent(row.false_detect)} |"
        )
    lines += ["", "## Misclassification lag", ""]
    if lag.expected_run is None:
        lines.append("No probe was ever misclassified; run statistics are empty.")
    else:
        lines.append(f"- expected run length E[X]: {lag.expected_run:.2f}")
        lines.append("- run length distribution: "
                     + ", ".join(f"{k} -> {_percent(p)}"
                                 for k, p in lag.run_length_dist.items()))
        lines.append("- first-error distribution: "
                     + ", ".join(f"{k} -> {_percent(p)}"
                                 for k, p in lag.first_error_dist.items()))
    lines += [
        "",
        "## Files",
        "",
        "See `confusion.csv`, `heatmap.csv`, `lag.csv`, and `sessions.csv` for",
        "machine-readable values; `model.txt` and `baselines.txt` replay the",
        "detector on the bundled `train.capture`/`test.capture` exactly.",
    ]
    return "\n".join(lines) + "\n"


def _confusion_csv(result: CampaignResult) -> str:
    out = StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("topic", "true_detect", "false_other",
                     "true_other", "false_detect"))
    for topic, row in result.confusion.rows.items():
        writer.writerow((topic, repr(row.true_detect), repr(row.false_other),
                         repr(row.true_other), repr(row.false_detect)))
    return out.getvalue()


def _heatmap_csv(result: CampaignResult) -> str:
    topics = result.config.categories.sensitive
    matrix = topic_score_matrix(result)
    out = StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("session_topic",) + tuple(topics))
    for topic in topics:
        writer.writerow((topic,)
                        + tuple(repr(matrix[topic][c]) for c in topics))
    return out.getvalue()


def _lag_csv(result: CampaignResult) -> str:
    out = StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("statistic", "key", "value"))
    lag = result.lag
    for k, p in lag.run_length_dist.items():
        writer.writerow(("run_length", k, repr(p)))
    for k, p in lag.first_error_dist.items():
        writer.writerow(("first_error", k, repr(p)))
    writer.writerow(("expected_run", "",
                     "" if lag.expected_run is None else repr(lag.expected_run)))
    return out.getvalue()


def write_bundle(result: CampaignResult, out_dir: str | Path) -> tuple[Path, ...]:
    """Write every campaign artifact under out_dir and return the paths."""
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    save_model(result.model, directory / "model.txt")
    save_baselines(result.baseline, directory / "baselines.txt")
    save_capture(result.training_traces, directory / "train.capture")
    save_capture(result.test_traces, directory / "test.capture")
    evaluation = campaign_evaluation(result)
    (directory / "sessions.csv").write_text(render_detections(evaluation),
                                            encoding="utf-8")
    (directory / "confusion.csv").write_text(_confusion_csv(result),
                                             encoding="utf-8")
    (directory / "heatmap.csv").write_text(_heatmap_csv(result),
                                           encoding="utf-8")
    (directory / "lag.csv").write_text(_lag_csv(result), encoding="utf-8")
    (directory / "summary.md").write_text(_summary_markdown(result),
                                          encoding="utf-8")
    return tuple(directory / name for name in BUNDLE_FILES)


def read_bundle_bytes(out_dir: str | Path) -> dict[str, bytes]:
    """Content of every bundle file, keyed by name (for byte comparisons)."""
    directory = Path(out_dir)
    return {name: (directory / name).read_bytes() for name in BUNDLE_FILES}

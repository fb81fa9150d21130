"""Session and campaign orchestration.

A session walks one generated (or hand-written) query script against a fresh
engine instance: every query entry becomes one interaction, wait entries only
pace the script and leave no mark on the trace, and the configured click
policy decides which advert slots of user-query pages get clicked.  Probe
responses are never clicked.

A campaign runs per-topic training sessions, fits the term-frequency model on
the adverts those sessions observed, calibrates per-topic intervals, and then
judges a separate set of test sessions.  All randomness fans out from one
master seed through named channels, so a campaign is a pure function of its
configuration and that seed.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field, replace
from typing import Sequence

from .corpus import CategorySet, Interaction, LabeledAdvert, SessionTrace
from .detector import (
    ConfusionMatrix,
    DetectorConfig,
    LagStatistics,
    ProbeVerdict,
    SessionVerdict,
    TopicBaseline,
    calibrate,
    classify_probe,
    confusion_matrix,
    detect_session,
    detection_rates,
    lag_statistics,
)
from .errors import ValidationError
from .estimator import PriModel, ScoreVector, score, train
from .scripts import (
    KIND_PROBE,
    KIND_WAIT,
    ClickPolicy,
    QueryScript,
    click_decision,
    generate_script,
    keyword_catalog,
    load_default_keywords,
)
from .simulator import AdEngine, EngineConfig, build_ad_pools, load_engine_config, new_engine

DEFAULT_PROBE = "symptoms and causes"


def derive_seed(master_seed: int, channel: str) -> int:
    """Stable 64-bit seed for one named random channel of a run."""
    digest = hashlib.sha256(f"{master_seed}:{channel}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def run_session(
    engine: AdEngine,
    script: QueryScript,
    policy: ClickPolicy | None,
    session_id: str,
) -> SessionTrace:
    """Drive one script against one engine and capture what the user saw."""
    if script.topic not in engine.categories:
        raise ValidationError(
            f"session {session_id}: topic {script.topic!r} is not an engine category"
        )
    interactions: list[Interaction] = []
    step = 0
    for entry in script.entries:
        if entry.kind == KIND_WAIT:
            continue
        step += 1
        is_probe = entry.kind == KIND_PROBE
        page = engine.submit_query(entry.text)
        clicked: list[int] = []
        if not is_probe and policy is not None:
            for advert in page.adverts:
                if click_decision(advert.text, policy, is_probe_response=False):
                    engine.register_click(advert.position)
                    clicked.append(advert.position)
        interactions.append(
            Interaction(step=step, query=entry.text, page=page,
                        clicked=tuple(clicked), is_probe=is_probe)
        )
    return SessionTrace(session_id=session_id, topic_label=script.topic,
                        interactions=tuple(interactions))


def training_corpus(
    traces: Sequence[SessionTrace], include_probe_adverts: bool = True
) -> list[LabeledAdvert]:
    """Every observed advert, labeled with the topic of its session."""
    corpus: list[LabeledAdvert] = []
    for trace in traces:
        for interaction in trace.interactions:
            if interaction.is_probe and not include_probe_adverts:
                continue
            for advert in interaction.page.adverts:
                corpus.append(LabeledAdvert(label=trace.topic_label,
                                            text=advert.text))
    return corpus


def score_probes(model: PriModel, trace: SessionTrace) -> tuple[ScoreVector, ...]:
    return tuple(
        score(model, probe.page.adverts, step=probe.step)
        for probe in trace.probes
    )


@dataclass(frozen=True)
class CampaignConfig:
    keywords: dict[str, list[str]] = field(default_factory=load_default_keywords)
    catchall: str = "other"
    train_sessions_per_topic: int = 3
    test_sessions_per_topic: int = 10
    engine: EngineConfig = field(
        default_factory=lambda: load_engine_config("google_like")
    )
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    probe: str = DEFAULT_PROBE
    clicks_enabled: bool = True
    include_probe_adverts: bool = True

    def __post_init__(self) -> None:
        if not self.keywords:
            raise ValidationError("campaign needs at least one sensitive topic")
        if self.train_sessions_per_topic < 1:
            raise ValidationError("train_sessions_per_topic must be at least 1")
        if self.test_sessions_per_topic < 1:
            raise ValidationError("test_sessions_per_topic must be at least 1")
        if not self.probe.strip():
            raise ValidationError("probe text must be nonempty")

    @property
    def categories(self) -> CategorySet:
        return CategorySet(tuple(sorted(self.keywords)), self.catchall)


@dataclass
class CampaignResult:
    config: CampaignConfig
    master_seed: int
    model: PriModel
    baseline: TopicBaseline
    training_traces: tuple[SessionTrace, ...]
    test_traces: tuple[SessionTrace, ...]
    probe_scores: dict[str, tuple[ScoreVector, ...]]
    probe_verdicts: dict[str, tuple[ProbeVerdict, ...]]
    session_verdicts: dict[str, SessionVerdict]
    truths: dict[str, str]
    confusion: ConfusionMatrix
    sensitive_rate: float
    false_positive_rate: float
    lag: LagStatistics

    @property
    def test_session_ids(self) -> tuple[str, ...]:
        return tuple(trace.session_id for trace in self.test_traces)


def run_campaign(config: CampaignConfig, master_seed: int) -> CampaignResult:
    categories = config.categories
    catalog = keyword_catalog(config.keywords, config.catchall)
    pools = build_ad_pools(config.keywords, config.catchall)

    def run_block(role: str, count: int) -> tuple[SessionTrace, ...]:
        traces = []
        for topic in categories.all_labels:
            for index in range(count):
                session_id = f"{role}-{topic}-{index:02d}"
                script = generate_script(
                    catalog[topic],
                    config.probe,
                    random.Random(derive_seed(master_seed, f"{session_id}:script")),
                )
                engine = new_engine(
                    replace(config.engine,
                            seed=derive_seed(master_seed, f"{session_id}:engine")),
                    pools,
                    categories,
                )
                policy = ClickPolicy(catalog[topic]) if config.clicks_enabled else None
                traces.append(run_session(engine, script, policy, session_id))
        return tuple(traces)

    training = run_block("train", config.train_sessions_per_topic)
    testing = run_block("test", config.test_sessions_per_topic)

    model = train(
        training_corpus(training, config.include_probe_adverts), categories
    )
    baseline = calibrate(model, training)

    probe_scores: dict[str, tuple[ScoreVector, ...]] = {}
    probe_verdicts: dict[str, tuple[ProbeVerdict, ...]] = {}
    session_verdicts: dict[str, SessionVerdict] = {}
    truths: dict[str, str] = {}
    for trace in testing:
        vectors = score_probes(model, trace)
        verdicts = tuple(
            classify_probe(vector, baseline, config.detector) for vector in vectors
        )
        probe_scores[trace.session_id] = vectors
        probe_verdicts[trace.session_id] = verdicts
        session_verdicts[trace.session_id] = detect_session(verdicts, config.detector)
        truths[trace.session_id] = trace.topic_label

    ordered_ids = [trace.session_id for trace in testing]
    verdict_list = [session_verdicts[sid] for sid in ordered_ids]
    truth_list = [truths[sid] for sid in ordered_ids]
    sensitive_rate, false_positive_rate = detection_rates(
        verdict_list, truth_list, categories.catchall
    )
    return CampaignResult(
        config=config,
        master_seed=master_seed,
        model=model,
        baseline=baseline,
        training_traces=training,
        test_traces=testing,
        probe_scores=probe_scores,
        probe_verdicts=probe_verdicts,
        session_verdicts=session_verdicts,
        truths=truths,
        confusion=confusion_matrix(verdict_list, truth_list, categories.sensitive),
        sensitive_rate=sensitive_rate,
        false_positive_rate=false_positive_rate,
        lag=lag_statistics(
            [probe_verdicts[sid] for sid in ordered_ids],
            truth_list,
            categories.catchall,
        ),
    )

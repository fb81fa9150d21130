"""Command-line surface.

Every subcommand is a thin wrapper over the library: parse flags, read
files, call one pipeline function, format the result.  Exit codes: 0
success, 1 usage problem, 2 invalid input data, 3 unexpected failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from io import StringIO
from pathlib import Path

from .config import load_config
from .corpus import CategorySet, parse_capture, parse_corpus, save_capture
from .detector import DetectorConfig, calibrate, parse_baselines
from .errors import PriError, UsageError, ValidationError
from .estimator import parse_model, save_model, score, train
from .probes import (
    DEFAULT_MIN_RATIO,
    DEFAULT_PROBES,
    default_ambiguity_report,
    extract_candidates,
    parse_ambiguity_csv,
    select_probe,
    write_candidates_csv,
)
from .reports import (
    evaluate_capture,
    render_csv,
    render_detections,
    render_text,
    write_bundle,
)
from .runner import (
    DEFAULT_PROBE,
    CampaignConfig,
    run_campaign,
    run_session,
)
from .scripts import CategoryKeywords, ClickPolicy, load_default_keywords, parse_script
from .simulator import build_ad_pools, load_engine_config, new_engine


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """argparse that reports bad flags through the package error types."""

    def error(self, message: str):  # noqa: D102 - argparse hook
        raise UsageError(message)


def _read_lines(path: str) -> list[str]:
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read {path!r}: {exc.strerror or exc}") from exc


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _comma_list(value: str, flag: str) -> tuple[str, ...]:
    items = tuple(part.strip() for part in value.split(",") if part.strip())
    if not items:
        raise UsageError(f"{flag} names no entries")
    return items


def _on_off(value: str, flag: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("on", "true", "yes", "1"):
        return True
    if lowered in ("off", "false", "no", "0"):
        return False
    raise UsageError(f"{flag} must be on or off, not {value!r}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_train(args: argparse.Namespace) -> int:
    lines = _read_lines(args.corpus)
    if args.categories:
        sensitive = _comma_list(args.categories, "--categories")
    else:
        labels = {
            line.partition("\t")[0].strip()
            for line in lines
            if line.strip() and not line.lstrip().startswith("#")
        }
        sensitive = tuple(sorted(labels - {args.catchall}))
    categories = CategorySet(sensitive, args.catchall)
    model = train(parse_corpus(lines, categories), categories)
    save_model(model, args.out)
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    model = parse_model(_read_lines(args.model))
    traces = parse_capture(_read_lines(args.capture))
    out = StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("session", "step", "category", "score"))
    for trace in traces:
        for interaction in trace.interactions:
            vector = score(model, interaction.page.adverts,
                           step=interaction.step)
            for category in model.categories.all_labels:
                writer.writerow((trace.session_id, interaction.step, category,
                                 repr(float(vector.scores[category]))))
    _emit(out.getvalue(), args.out)
    return 0


def _detector_config(args: argparse.Namespace) -> DetectorConfig:
    return DetectorConfig(
        epsilon=args.epsilon,
        sigma_multiplier=args.sigma_multiplier,
        session_probe_count=args.probe_count,
    )


def cmd_detect(args: argparse.Namespace) -> int:
    model = parse_model(_read_lines(args.model))
    traces = parse_capture(_read_lines(args.capture))
    if args.baselines:
        baseline = parse_baselines(_read_lines(args.baselines))
    else:
        baseline = calibrate(model, parse_capture(_read_lines(args.calibrate)))
    evaluation = evaluate_capture(model, baseline, traces,
                                  _detector_config(args), args.catchall)
    _emit(render_detections(evaluation), args.out)
    return 0


def cmd_probe_select(args: argparse.Namespace) -> int:
    if args.capture and args.topics:
        raise UsageError("--capture and --topics are separate modes; pick one")
    if args.capture:
        traces = parse_capture(_read_lines(args.capture))
        pages = [it.page for trace in traces for it in trace.interactions]
        candidates = extract_candidates(pages, top_k=args.top)
        out = StringIO()
        write_candidates_csv(candidates, out)
        _emit(out.getvalue(), args.out)
        return 0
    if args.topics:
        topics = _comma_list(args.topics, "--topics")
        if args.ambiguity:
            report = parse_ambiguity_csv(_read_lines(args.ambiguity))
        else:
            report = default_ambiguity_report()
        probes = (tuple(p.strip() for p in args.probes.split(";") if p.strip())
                  if args.probes else DEFAULT_PROBES)
        chosen = select_probe(probes, report, topics,
                              min_ratio=args.min_ratio,
                              keywords=load_default_keywords())
        _emit(chosen + "\n", args.out)
        return 0
    raise UsageError("probe-select needs --capture (rank candidate terms) "
                     "or --topics (choose a probe for a topic group)")


def cmd_simulate(args: argparse.Namespace) -> int:
    script = parse_script(_read_lines(args.script))
    if not script.topic:
        raise ValidationError(
            f"script {args.script!r} names no topic; add a '! topic:' line")
    keywords = load_default_keywords()
    categories = CategorySet(tuple(sorted(keywords)), args.catchall)
    engine = new_engine(
        load_engine_config(args.engine, seed=args.seed),
        build_ad_pools(keywords, args.catchall),
        categories,
    )
    policy = None
    if _on_off(args.clicks, "--clicks") and script.keywords:
        policy = ClickPolicy(CategoryKeywords(script.topic, script.keywords))
    session_id = args.session_id or f"sim-{script.topic}-00"
    trace = run_session(engine, script, policy, session_id)
    save_capture([trace], args.out)
    return 0


def cmd_campaign(args: argparse.Namespace) -> int:
    settings = load_config(args.config) if args.config else {}

    def setting(flag_value, key: str, default):
        if flag_value is not None:
            return flag_value
        return settings.get(key, default)

    engine = load_engine_config(setting(args.engine, "engine", "google_like"))
    if args.adaptation_lag is not None:
        from dataclasses import replace
        engine = replace(engine, adaptation_lag=args.adaptation_lag)
    detector = DetectorConfig(
        epsilon=setting(args.epsilon, "epsilon", None),
        sigma_multiplier=float(setting(args.sigma_multiplier,
                                       "sigma_multiplier", 3.0)),
        session_probe_count=int(setting(args.probe_count,
                                        "session_probe_count", 5)),
    )
    clicks = setting(args.clicks, "clicks", "on")
    config = CampaignConfig(
        train_sessions_per_topic=int(setting(args.train, "train_sessions_per_topic", 3)),
        test_sessions_per_topic=int(setting(args.test, "test_sessions_per_topic", 10)),
        engine=engine,
        detector=detector,
        probe=setting(args.probe, "probe", DEFAULT_PROBE),
        clicks_enabled=_on_off(str(clicks), "--clicks"),
    )
    result = run_campaign(config, master_seed=args.seed)
    paths = write_bundle(result, args.out)
    sys.stdout.write(
        f"sensitive detection rate: {100.0 * result.sensitive_rate:.1f}%\n"
        f"false positive rate: {100.0 * result.false_positive_rate:.1f}%\n"
        f"wrote {len(paths)} files under {args.out}\n"
    )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    model = parse_model(_read_lines(args.model))
    baseline = parse_baselines(_read_lines(args.baselines))
    traces = parse_capture(_read_lines(args.capture))
    evaluation = evaluate_capture(model, baseline, traces,
                                  _detector_config(args), args.catchall)
    render = render_csv if args.format == "csv" else render_text
    _emit(render(evaluation), args.out)
    return 0


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------

def _add_detector_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sigma-multiplier", type=float, default=3.0,
                        help="interval half-width in sigmas (default 3)")
    parser.add_argument("--probe-count", type=int, default=5,
                        help="probes per detection session (default 5)")
    parser.add_argument("--epsilon", type=float, default=None,
                        help="optional hard score bound to report violations of")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="pri",
        description="Measure what a search engine has learned about a user "
                    "from the adverts it serves.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("train", help="train a term-frequency model on a corpus")
    p.add_argument("--corpus", required=True,
                   help="label<TAB>advert text file")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--categories", default=None,
                   help="comma-separated sensitive labels "
                        "(default: every corpus label except the catch-all)")
    p.add_argument("--catchall", default="other")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score every page of a capture")
    p.add_argument("--model", required=True)
    p.add_argument("--capture", required=True)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("detect", help="flag sensitive sessions in a capture")
    p.add_argument("--model", required=True)
    p.add_argument("--capture", required=True)
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--baselines", help="calibrated baselines file")
    source.add_argument("--calibrate",
                        help="training capture to calibrate baselines from")
    p.add_argument("--catchall", default="other")
    _add_detector_flags(p)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("probe-select",
                       help="rank candidate probe terms, or choose a probe "
                            "for a topic group")
    p.add_argument("--capture", default=None,
                   help="rank the most frequent page terms in this capture")
    p.add_argument("--top", type=int, default=10,
                   help="candidates to list (default 10)")
    p.add_argument("--topics", default=None,
                   help="comma-separated topic group to choose a probe for")
    p.add_argument("--probes", default=None,
                   help="semicolon-separated candidate probes "
                        "(default: the bundled pair)")
    p.add_argument("--ambiguity", default=None,
                   help="ambiguity CSV (default: bundled survey data)")
    p.add_argument("--min-ratio", type=float, default=DEFAULT_MIN_RATIO,
                   help="minimum acceptable result-ratio per topic")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_probe_select)

    p = sub.add_parser("simulate", help="run one scripted session against "
                                        "a simulated engine")
    p.add_argument("--script", required=True, help="query script file")
    p.add_argument("--engine", required=True,
                   help="engine preset name (google_like, bing_like) "
                        "or a settings file path")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--session-id", default=None)
    p.add_argument("--clicks", default="on", help="on|off (default on)")
    p.add_argument("--catchall", default="other")
    p.add_argument("--out", required=True, help="capture file to write")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("campaign", help="train, calibrate, and evaluate a "
                                        "full multi-session experiment")
    p.add_argument("--seed", type=int, required=True,
                   help="master seed every session derives from")
    p.add_argument("--out", required=True, help="directory for the artifacts")
    p.add_argument("--config", default=None,
                   help="key = value settings file (flags override it)")
    p.add_argument("--engine", default=None,
                   help="engine preset name or settings file "
                        "(default google_like)")
    p.add_argument("--adaptation-lag", type=int, default=None,
                   help="override the engine's update delay")
    p.add_argument("--train", type=int, default=None,
                   help="training sessions per topic (default 3)")
    p.add_argument("--test", type=int, default=None,
                   help="test sessions per topic (default 10)")
    p.add_argument("--clicks", default=None, help="on|off (default on)")
    p.add_argument("--probe", default=None,
                   help=f"probe query (default {DEFAULT_PROBE!r})")
    p.add_argument("--sigma-multiplier", type=float, default=None)
    p.add_argument("--probe-count", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("report", help="render detection tables for a capture")
    p.add_argument("--model", required=True)
    p.add_argument("--baselines", required=True)
    p.add_argument("--capture", required=True)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--catchall", default="other")
    _add_detector_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_usage(sys.stderr)
            print("error: no subcommand given", file=sys.stderr)
            return 1
        return args.func(args)
    except SystemExit as exc:  # argparse --help
        code = exc.code
        return code if isinstance(code, int) else 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PriError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - last resort
        print(f"unexpected error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())

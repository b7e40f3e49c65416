"""Command line entry point: ``vsm-probe run|score|compare|report``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .collection import load_experiment_set, run_experiment
from .errors import VsmProbeError
from .gateway import (
    EndpointConfig,
    HttpBackend,
    ReplayBackend,
    ReplayCache,
    RetryPolicy,
    SamplingParams,
    scripted_responder,
)
from .protocol import ExperimentConfig
from .questionnaire import Locale
from .reference_data import load_human_reference, load_mmlu
from .reporting import (
    Metric,
    comparison_matrix,
    disparity_csv,
    export,
    identity_scores_csv,
    intra_set_report,
    mmlu_delta_matrix,
    render,
)
from .scoring import ScoringConstants

log = logging.getLogger("vsm_probe")


def _constants(text: str | None) -> ScoringConstants:
    if not text:
        return ScoringConstants()
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 6:
        raise argparse.ArgumentTypeError("--constants needs six comma-separated numbers")
    return ScoringConstants(*parts)


def _seeds(args) -> tuple:
    if args.seed_list:
        return tuple(int(s) for s in args.seed_list.split(","))
    return tuple(range(args.seeds))


def cmd_run(args) -> int:
    out = Path(args.out)
    cache = ReplayCache(args.cache or out / "cache")
    endpoint = None
    if args.scripted:
        upstream = scripted_responder(args.scripted)
    elif args.replay_only:
        upstream = None
    else:
        if not args.endpoint:
            raise SystemExit("run: --endpoint is required unless --scripted or --replay-only is given")
        endpoint = EndpointConfig(
            base_url=args.endpoint,
            api_key=os.environ.get(args.api_key_env, ""),
            timeout=args.timeout,
            max_in_flight=args.max_in_flight,
            retry=RetryPolicy(attempts=args.retries),
            send_seed=not args.no_seed_param,
        )
        upstream = HttpBackend(endpoint)
    backend = ReplayBackend(cache, upstream=upstream, strict=True)

    config = ExperimentConfig(
        model_name=args.model,
        prompt_locale=Locale.parse(args.lang),
        shuffle=args.shuffle,
        response_language=Locale.parse(args.response_lang) if args.response_lang else None,
        seeds=_seeds(args),
        endpoint=endpoint,
        sampling=SamplingParams(args.temperature, args.top_p, args.max_tokens),
        label=args.label,
    )
    exp = run_experiment(
        config,
        backend,
        out,
        tolerate_transport=args.tolerate_transport,
        max_in_flight=args.max_in_flight,
    )
    print(f"{exp.label}: {exp.manifest['record_count']} records, "
          f"recognizability {exp.recognizability_rate:.4f} -> {out}")
    return 0


def cmd_score(args) -> int:
    exp = load_experiment_set(args.set)
    report = intra_set_report(exp, load_human_reference(), _constants(args.constants))
    text = render(report, args.format)
    if args.out:
        export(report, args.format, args.out)
    else:
        sys.stdout.write(text)
    return 0


def cmd_compare(args) -> int:
    sets = [load_experiment_set(d) for d in args.sets]
    matrix = comparison_matrix(sets, args.metric, load_human_reference(), _constants(args.constants))
    if args.out:
        export(matrix, args.format, args.out)
    else:
        sys.stdout.write(render(matrix, args.format))
    return 0


def cmd_report(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    human = load_human_reference()
    c = _constants(args.constants)
    sets = [load_experiment_set(d) for d in args.sets]
    reports = [intra_set_report(s, human, c) for s in sets]

    for i, r in enumerate(reports):
        stem = f"set{i:02d}"
        export(r, "json", out / f"{stem}_report.json")
        export(r, "csv", out / f"{stem}_nationals.csv")
        (out / f"{stem}_identity_scores.csv").write_text(identity_scores_csv(r), encoding="utf-8")
    (out / "disparity.csv").write_text(disparity_csv(reports, human), encoding="utf-8")

    if len(sets) >= 2:
        for metric in (Metric.DBI, Metric.SS, Metric.SS_H, Metric.PEARSON_RHO, Metric.PEARSON_P):
            m = comparison_matrix(sets, metric, human, c, on_error="blank")
            export(m, "csv", out / f"matrix_{metric.value}.csv")
            export(m, "json", out / f"matrix_{metric.value}.json")
    if args.mmlu:
        table = load_mmlu(args.mmlu)
        models = list(dict.fromkeys(s.config.model_name for s in sets))
        m = mmlu_delta_matrix(table, models)
        export(m, "csv", out / "matrix_mmlu_delta.csv")
        export(m, "json", out / "matrix_mmlu_delta.json")
    print(f"wrote report for {len(sets)} set(s) to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vsm-probe", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="administer the questionnaire and persist an experiment set")
    run.add_argument("--model", required=True)
    run.add_argument("--lang", choices=["en", "zh"], default="en", help="prompt language")
    run.add_argument("--response-lang", choices=["en", "zh"], help="reply language (default: --lang)")
    run.add_argument("--shuffle", action="store_true", help="shuffle option positions per seed")
    run.add_argument("--seeds", type=int, default=10, help="number of repetition seeds (0..N-1)")
    run.add_argument("--seed-list", help="explicit comma-separated seeds, overrides --seeds")
    run.add_argument("--endpoint", help="base URL of an OpenAI-compatible API, e.g. http://host:8000/v1")
    run.add_argument("--api-key-env", default="OPENAI_API_KEY", help="env var holding the bearer token")
    run.add_argument("--timeout", type=float, default=60.0)
    run.add_argument("--max-in-flight", type=int, default=4)
    run.add_argument("--retries", type=int, default=3)
    run.add_argument("--no-seed-param", action="store_true", help="never send the seed field")
    run.add_argument("--temperature", type=float, default=1.0)
    run.add_argument("--top-p", type=float, default=1.0)
    run.add_argument("--max-tokens", type=int, default=512)
    run.add_argument("--out", required=True)
    run.add_argument("--cache", help="replay cache directory (default: OUT/cache)")
    run.add_argument("--replay-only", action="store_true", help="serve only from the replay cache")
    run.add_argument("--scripted", metavar="POLICY",
                     help="offline responder: fixed:K, uniform:SEED, malformed:RATE[:SEED], profile:PATH (JSON file)")
    run.add_argument("--tolerate-transport", action="store_true",
                     help="record exhausted retries as unrecognizable instead of halting")
    run.add_argument("--label", help="set label used in reports")
    run.set_defaults(func=cmd_run)

    score = sub.add_parser("score", help="national VSM scores and disparity for one set")
    score.add_argument("--set", required=True)
    score.add_argument("--format", choices=["csv", "json"], default="csv")
    score.add_argument("--constants", help="C for PDI,IDV,MAS,UAI,LTO,IVR (default all 0)")
    score.add_argument("--out")
    score.set_defaults(func=cmd_score)

    compare = sub.add_parser("compare", help="pairwise metric matrix across sets")
    compare.add_argument("--sets", nargs="+", required=True)
    compare.add_argument("--metric", choices=["ss_h", "ss", "dbi", "pearson", "pearson_p"], default="ss_h")
    compare.add_argument("--format", choices=["csv", "json"], default="csv")
    compare.add_argument("--constants")
    compare.add_argument("--out")
    compare.set_defaults(func=cmd_compare)

    report = sub.add_parser("report", help="write every table and matrix for a group of sets")
    report.add_argument("--sets", nargs="+", required=True)
    report.add_argument("--mmlu", help="CSV of model,score")
    report.add_argument("--constants")
    report.add_argument("--out", required=True)
    report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except VsmProbeError as exc:
        print(f"vsm-probe: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

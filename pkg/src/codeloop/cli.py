"""Command-line front end.

    codeloop run --dataset problems.jsonl --format humaneval \
        --model gpt-4 --api-base https://api.openai.com/v1 \
        --api-key-env OPENAI_API_KEY --out results/

    codeloop score --out results/
    codeloop trace --out results/ --id HumanEval/0

The API key is read from the environment variable named by --api-key-env;
there is deliberately no flag that accepts the key itself. Exit codes:
0 success, 1 infrastructure failure, 2 bad arguments.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .datasets import DATASET_NAMES, DatasetDescriptor, SchemaError
from .gateway import (
    Gateway,
    GatewayError,
    LiveGateway,
    ModelConfig,
    RecordingGateway,
    ReplayGateway,
    Transcript,
)
from .harness import (
    EmptyRun,
    REPORT_FILENAME,
    RunReport,
    evaluate_records,
    load_result_records,
    run_benchmark,
)
from .models import RunConfig
from .sandbox import SandboxError

log = logging.getLogger(__name__)

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_INFRA = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="codeloop", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve a dataset and write results + report")
    run.add_argument("--dataset", required=True, help="path to the problem records file")
    run.add_argument("--format", required=True, choices=DATASET_NAMES, help="dataset family")
    run.add_argument("--model", default="gpt-4", help="model name sent to the endpoint")
    run.add_argument("--api-base", default="https://api.openai.com/v1", help="endpoint base URL")
    run.add_argument(
        "--api-key-env",
        default="OPENAI_API_KEY",
        help="name of the environment variable holding the API key",
    )
    run.add_argument("--p", type=int, default=5, help="maximum planning cycles")
    run.add_argument("--d", type=int, default=5, help="maximum debugging rounds per cycle")
    run.add_argument("--workers", type=int, default=1, help="parallel problem workers")
    run.add_argument("--timeout-sec", type=float, default=10.0, help="per test case timeout")
    run.add_argument("--out", required=True, help="output directory for results and report")
    run.add_argument("--replay", metavar="TRANSCRIPT", help="serve responses from a transcript")
    run.add_argument("--record", metavar="TRANSCRIPT", help="record live responses to a transcript")
    run.add_argument("--shim", help="path to the case-runner shim")
    run.add_argument("--temperature", type=float, default=0.0)
    run.add_argument("-v", "--verbose", action="store_true")

    score = sub.add_parser("score", help="recompute the report from stored results")
    score.add_argument("--out", required=True)

    trace = sub.add_parser("trace", help="pretty-print one problem's event trace")
    trace.add_argument("--out", required=True)
    trace.add_argument("--id", required=True, dest="problem_id")

    return parser


def _build_gateway(args: argparse.Namespace, cfg: ModelConfig) -> Gateway:
    if args.replay:
        return ReplayGateway(Transcript.load(args.replay))
    live = LiveGateway(cfg)
    if args.record:
        return RecordingGateway(live, args.record)
    return live


def _print_report(report: RunReport, stream=None) -> None:
    stream = stream if stream is not None else sys.stdout
    for row in report.per_problem:
        mark = "PASS" if row.solved_hidden else "fail"
        print(
            f"{mark}  {row.id}  calls={row.llm_calls}  tokens={row.tokens}  "
            f"wall={row.wall_time:.1f}s",
            file=stream,
        )
    print(
        f"pass@1={report.pass_at_1:.4f}  avg_calls={report.avg_api_calls:.2f}  "
        f"avg_tokens_k={report.avg_tokens_thousands:.2f}  problems={len(report.per_problem)}  "
        f"infra_errors={report.infra_errors}",
        file=stream,
    )


def _cmd_run(args: argparse.Namespace) -> int:
    if args.replay and args.record:
        print("--replay and --record are mutually exclusive", file=sys.stderr)
        return EXIT_USAGE
    if not Path(args.dataset).exists():
        print(f"dataset file not found: {args.dataset}", file=sys.stderr)
        return EXIT_USAGE
    if not args.replay and not os.environ.get(args.api_key_env):
        print(f"environment variable {args.api_key_env} is not set", file=sys.stderr)
        return EXIT_USAGE

    cfg = ModelConfig(
        model_name=args.model,
        api_base_url=args.api_base,
        api_key_ref=args.api_key_env,
        temperature=args.temperature,
    )
    config = RunConfig(
        model=cfg,
        p=args.p,
        d=args.d,
        per_case_timeout=args.timeout_sec,
        total_sandbox_timeout=args.timeout_sec * 6,
    )
    desc = DatasetDescriptor(name=args.format, path=Path(args.dataset))
    gateway = _build_gateway(args, cfg)

    try:
        report = run_benchmark(
            desc, config, args.workers, args.out, gateway=gateway, shim_path=args.shim
        )
    except (SchemaError, EmptyRun) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GatewayError, SandboxError, OSError) as exc:
        print(f"infrastructure failure: {exc}", file=sys.stderr)
        return EXIT_INFRA

    _print_report(report)
    return EXIT_INFRA if report.infra_errors else EXIT_OK


def _cmd_score(args: argparse.Namespace) -> int:
    try:
        records = load_result_records(args.out)
        report = evaluate_records(records)
    except EmptyRun:
        print(f"no result records under {args.out}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"could not read results: {exc}", file=sys.stderr)
        return EXIT_INFRA
    (Path(args.out) / REPORT_FILENAME).write_text(json.dumps(report.to_dict(), indent=2), "utf-8")
    _print_report(report)
    return EXIT_OK


def _cmd_trace(args: argparse.Namespace) -> int:
    try:
        records = load_result_records(args.out)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"could not read results: {exc}", file=sys.stderr)
        return EXIT_INFRA
    match = next((r for r in records if r.problem_id == args.problem_id), None)
    if match is None:
        print(f"no record for id {args.problem_id!r}", file=sys.stderr)
        return EXIT_USAGE

    print(f"id: {match.problem_id}")
    print(f"solved_samples: {match.solved_samples}   solved_hidden: {match.solved_hidden}")
    if match.error:
        print(f"error: {match.error}")
    print(
        f"usage: {match.usage.api_calls} calls, "
        f"{match.usage.prompt_tokens}+{match.usage.completion_tokens} tokens"
        f"{' (estimated)' if match.usage.estimated else ''}"
    )
    for event in match.trace:
        verdict = ""
        if event.passed is not None:
            verdict = "  PASS" if event.passed else "  FAIL"
        print(
            f"  {event.stage.value:<13} cycle={event.cycle} round={event.round}"
            f"  calls={event.usage_delta.api_calls}"
            f"  tokens={event.usage_delta.total_tokens}{verdict}"
        )
    if match.final_code:
        print("final code:")
        for line in match.final_code.splitlines():
            print(f"    {line}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "score":
        return _cmd_score(args)
    return _cmd_trace(args)


if __name__ == "__main__":
    raise SystemExit(main())

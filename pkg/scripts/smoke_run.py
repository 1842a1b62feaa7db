"""Live smoke run against an OpenAI-compatible endpoint.

    OPENAI_API_KEY=... python3 scripts/smoke_run.py \
        --dataset demo/problems.jsonl --format humaneval \
        --model gpt-4o-mini --out /tmp/smoke

Solves a small slice (default 10 problems), prints the report, then
re-invokes the run to demonstrate that resumption adds zero new records.
"""
import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from codeloop import DatasetDescriptor, RunConfig, run_benchmark
from codeloop.datasets import load_records
from codeloop.gateway import ModelConfig


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("--dataset", required=True)
    parser.add_argument("--format", default="humaneval")
    parser.add_argument("--model", default="gpt-4o-mini")
    parser.add_argument("--api-base", default="https://api.openai.com/v1")
    parser.add_argument("--api-key-env", default="OPENAI_API_KEY")
    parser.add_argument("--out", required=True)
    parser.add_argument("--slice", type=int, default=10, help="problems to keep")
    parser.add_argument("--p", type=int, default=2)
    parser.add_argument("--d", type=int, default=2)
    parser.add_argument("--workers", type=int, default=2)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = load_records(args.dataset)[: args.slice]
    slice_path = out / "slice.jsonl"
    slice_path.write_text("".join(json.dumps(r) + "\n" for r in records), "utf-8")

    config = RunConfig(
        model=ModelConfig(
            model_name=args.model, api_base_url=args.api_base, api_key_ref=args.api_key_env
        ),
        p=args.p,
        d=args.d,
    )
    desc = DatasetDescriptor(name=args.format, path=slice_path)

    report = run_benchmark(desc, config, parallelism=args.workers, output_dir=out)
    print(
        f"pass@1={report.pass_at_1:.4f}  avg_calls={report.avg_api_calls:.2f}  "
        f"avg_tokens_k={report.avg_tokens_thousands:.2f}  infra_errors={report.infra_errors}"
    )

    resumed = run_benchmark(desc, config, parallelism=args.workers, output_dir=out)
    assert len(resumed.per_problem) == len(report.per_problem), "resume changed the row count"
    print("resume check: ok (no problems re-solved)")
    return 0 if report.infra_errors == 0 else 1


if __name__ == "__main__":
    raise SystemExit(main())

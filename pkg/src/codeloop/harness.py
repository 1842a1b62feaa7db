"""Batch evaluation: solve every problem in a dataset, judge the final code
on hidden tests strictly after the solve finishes, stream one JSON record
per problem, and aggregate a report.

The results file is append-only JSON lines: a crashed or killed run restarts
by skipping every id already present, and previously written lines are never
rewritten. Scoring is a pure recount over those records, so `score` can be
re-run at any time without touching the model.
"""
from __future__ import annotations

import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

from .datasets import DatasetDescriptor, load_dataset
from .gateway import Gateway, GatewayError, LiveGateway
from .models import (
    AgentEvent,
    Problem,
    RunConfig,
    SolveOutcome,
    UsageStats,
    validate_problem,
)
from .orchestrator import solve
from .sandbox import EvalVerdict, ExecutionLimits, SandboxError, run_hidden_tests

log = logging.getLogger(__name__)

__all__ = [
    "EmptyRun",
    "IdMismatch",
    "ProblemRow",
    "RunReport",
    "ResultRecord",
    "evaluate_run",
    "evaluate_records",
    "solve_one",
    "run_benchmark",
    "load_result_records",
    "RESULTS_FILENAME",
    "REPORT_FILENAME",
]

RESULTS_FILENAME = "results.jsonl"
REPORT_FILENAME = "report.json"


class EmptyRun(Exception):
    """Scoring zero problems is meaningless, not 0%."""


class IdMismatch(Exception):
    """Problems and results do not pair up one-to-one."""


# =============================================================================
# Report types
# =============================================================================

@dataclass(frozen=True)
class ProblemRow:
    id: str
    solved_hidden: bool
    solved_samples: bool
    llm_calls: int
    tokens: int
    wall_time: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "solved_hidden": self.solved_hidden,
            "solved_samples": self.solved_samples,
            "llm_calls": self.llm_calls,
            "tokens": self.tokens,
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ProblemRow":
        return cls(
            id=data["id"],
            solved_hidden=data["solved_hidden"],
            solved_samples=data["solved_samples"],
            llm_calls=data["llm_calls"],
            tokens=data["tokens"],
            wall_time=data["wall_time"],
        )


@dataclass(frozen=True)
class RunReport:
    per_problem: tuple[ProblemRow, ...]
    pass_at_1: float
    avg_api_calls: float
    avg_tokens_thousands: float
    infra_errors: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "per_problem": [row.to_dict() for row in self.per_problem],
            "aggregate": {
                "pass_at_1": self.pass_at_1,
                "avg_api_calls": self.avg_api_calls,
                "avg_tokens_thousands": self.avg_tokens_thousands,
                "infra_errors": self.infra_errors,
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunReport":
        agg = data["aggregate"]
        return cls(
            per_problem=tuple(ProblemRow.from_dict(r) for r in data["per_problem"]),
            pass_at_1=agg["pass_at_1"],
            avg_api_calls=agg["avg_api_calls"],
            avg_tokens_thousands=agg["avg_tokens_thousands"],
            infra_errors=agg.get("infra_errors", 0),
        )


def _aggregate(rows: Sequence[ProblemRow], infra_errors: int = 0) -> RunReport:
    if not rows:
        raise EmptyRun("no problems to score")
    n = len(rows)
    return RunReport(
        per_problem=tuple(rows),
        pass_at_1=sum(1 for r in rows if r.solved_hidden) / n,
        avg_api_calls=sum(r.llm_calls for r in rows) / n,
        avg_tokens_thousands=sum(r.tokens for r in rows) / n / 1000.0,
        infra_errors=infra_errors,
    )


def evaluate_run(
    problems: Sequence[Problem],
    outcomes: Sequence[SolveOutcome],
    verdicts: Sequence[EvalVerdict],
    wall_times: Optional[Sequence[float]] = None,
) -> RunReport:
    """Score positionally paired problems, solve outcomes, and hidden-test
    verdicts. Length disagreement is an IdMismatch; an empty batch is an
    EmptyRun."""
    if not (len(problems) == len(outcomes) == len(verdicts)):
        raise IdMismatch(
            f"{len(problems)} problems, {len(outcomes)} outcomes, {len(verdicts)} verdicts"
        )
    if not problems:
        raise EmptyRun("no problems to score")
    if wall_times is not None and len(wall_times) != len(problems):
        raise IdMismatch("wall_times length differs from problems")
    rows = [
        ProblemRow(
            id=p.id,
            solved_hidden=v.solved,
            solved_samples=o.solved_samples,
            llm_calls=o.usage.api_calls,
            tokens=o.usage.total_tokens,
            wall_time=wall_times[i] if wall_times is not None else 0.0,
        )
        for i, (p, o, v) in enumerate(zip(problems, outcomes, verdicts))
    ]
    return _aggregate(rows)


# =============================================================================
# Per-problem result records (the JSONL row)
# =============================================================================

@dataclass(frozen=True)
class ResultRecord:
    problem_id: str
    final_code: Optional[str]
    solved_samples: bool
    solved_hidden: bool
    trace: tuple[AgentEvent, ...]
    usage: UsageStats
    wall_time: float
    hidden_failures: tuple[dict, ...] = ()
    error: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.problem_id,
            "final_code": self.final_code,
            "solved_samples": self.solved_samples,
            "solved_hidden": self.solved_hidden,
            "trace": [e.to_dict() for e in self.trace],
            "usage": self.usage.to_dict(),
            "wall_time": self.wall_time,
            "hidden_failures": list(self.hidden_failures),
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ResultRecord":
        return cls(
            problem_id=data["id"],
            final_code=data.get("final_code"),
            solved_samples=data["solved_samples"],
            solved_hidden=data["solved_hidden"],
            trace=tuple(AgentEvent.from_dict(e) for e in data.get("trace", [])),
            usage=UsageStats.from_dict(data["usage"]),
            wall_time=data.get("wall_time", 0.0),
            hidden_failures=tuple(data.get("hidden_failures", [])),
            error=data.get("error"),
        )

    def to_row(self) -> ProblemRow:
        return ProblemRow(
            id=self.problem_id,
            solved_hidden=self.solved_hidden,
            solved_samples=self.solved_samples,
            llm_calls=self.usage.api_calls,
            tokens=self.usage.total_tokens,
            wall_time=self.wall_time,
        )


def evaluate_records(records: Sequence[ResultRecord]) -> RunReport:
    """Recount a report purely from stored records (the `score` path)."""
    if not records:
        raise EmptyRun("no result records to score")
    infra = sum(1 for r in records if r.error is not None)
    return _aggregate([r.to_row() for r in records], infra_errors=infra)


def load_result_records(output_dir: Union[str, Path]) -> list[ResultRecord]:
    path = Path(output_dir) / RESULTS_FILENAME
    records: list[ResultRecord] = []
    if not path.exists():
        return records
    for line in path.read_text("utf-8").splitlines():
        line = line.strip()
        if line:
            records.append(ResultRecord.from_dict(json.loads(line)))
    return records


# =============================================================================
# Solving one problem end to end
# =============================================================================

def solve_one(
    problem: Problem,
    config: RunConfig,
    gateway: Gateway,
    shim_path: Union[str, Path, None] = None,
) -> ResultRecord:
    """Solve, then judge on hidden tests. Hidden execution starts only after
    the solve loop has fully finished, so nothing from it can reach a prompt.
    Infrastructure errors become the record's `error` field."""
    started = time.monotonic()
    violations = validate_problem(problem)
    if violations:
        return ResultRecord(
            problem_id=problem.id,
            final_code=None,
            solved_samples=False,
            solved_hidden=False,
            trace=(),
            usage=UsageStats(),
            wall_time=time.monotonic() - started,
            error="invalid problem: " + "; ".join(violations),
        )

    try:
        outcome = solve(problem, config, gateway, shim_path=shim_path)
    except (GatewayError, SandboxError) as exc:
        return ResultRecord(
            problem_id=problem.id,
            final_code=None,
            solved_samples=False,
            solved_hidden=False,
            trace=(),
            usage=UsageStats(),
            wall_time=time.monotonic() - started,
            error=f"{type(exc).__name__}: {exc}",
        )

    hidden_failures: tuple[dict, ...] = ()
    solved_hidden = False
    error = None
    if outcome.final_code is not None:
        limits = ExecutionLimits(
            per_case_timeout=config.per_case_timeout,
            total_timeout=config.total_sandbox_timeout,
        )
        try:
            verdict = run_hidden_tests(outcome.final_code, problem.hidden_tests, limits, shim_path)
            solved_hidden = verdict.solved
            hidden_failures = tuple(
                {"category": f.category.value, "observed": f.observed}
                for f in verdict.detail.failures
            )
        except SandboxError as exc:
            error = f"{type(exc).__name__}: {exc}"

    return ResultRecord(
        problem_id=problem.id,
        final_code=outcome.final_code.body if outcome.final_code else None,
        solved_samples=outcome.solved_samples,
        solved_hidden=solved_hidden,
        trace=outcome.trace,
        usage=outcome.usage,
        wall_time=time.monotonic() - started,
        hidden_failures=hidden_failures,
        error=error,
    )


# =============================================================================
# Batch driver
# =============================================================================

def run_benchmark(
    desc: DatasetDescriptor,
    config: RunConfig,
    parallelism: int,
    output_dir: Union[str, Path],
    *,
    gateway: Optional[Gateway] = None,
    shim_path: Union[str, Path, None] = None,
) -> RunReport:
    """Solve a whole dataset with a bounded worker pool.

    Appends one record per problem to results.jsonl as each finishes (a
    single lock serializes writers), skips ids already present from an
    earlier run, then recounts and writes report.json over everything.
    Per-problem failures land in their records; the batch never aborts.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    results_path = out / RESULTS_FILENAME

    problems = load_dataset(desc)
    existing = load_result_records(out)
    done_ids = {r.problem_id for r in existing}
    pending = [p for p in problems if p.id not in done_ids]
    if done_ids:
        log.info("resuming: %d of %d already complete", len(done_ids), len(problems))

    if gateway is None:
        gateway = LiveGateway(config.model)

    write_lock = threading.Lock()

    def record_result(record: ResultRecord) -> None:
        line = json.dumps(record.to_dict())
        with write_lock:
            with results_path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()

    new_records: list[ResultRecord] = []
    if pending:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = {
                pool.submit(solve_one, problem, config, gateway, shim_path): problem
                for problem in pending
            }
            for future in as_completed(futures):
                record = future.result()
                record_result(record)
                new_records.append(record)
                log.info(
                    "%s: samples=%s hidden=%s calls=%d",
                    record.problem_id,
                    record.solved_samples,
                    record.solved_hidden,
                    record.usage.api_calls,
                )

    by_id = {r.problem_id: r for r in [*existing, *new_records]}
    ordered = [by_id[p.id] for p in problems if p.id in by_id]
    if len(ordered) != len(problems):
        missing = [p.id for p in problems if p.id not in by_id]
        raise IdMismatch(f"no result record for: {missing[:5]}")

    report = evaluate_records(ordered)
    (out / REPORT_FILENAME).write_text(json.dumps(report.to_dict(), indent=2), "utf-8")
    return report

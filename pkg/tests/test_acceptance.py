"""End-to-end acceptance checks, one test per shipping requirement:

1. Replaying the worked-example transcript reproduces the exact event
   sequence, call count, and byte-identical prompts, in under a second.
2. Randomized chaotic runs (200 trials) never exceed budgets and keep
   every trace invariant, in under ten seconds.
3. Worst-case call counts for the three reference budget configurations
   match an independent hand-written step counter.
4. Scoring 50 synthetic records equals a brute-force recount exactly,
   including token aggregates derived from per-event sums.
5. Response parsers pin the worked-example values and survive a
   1000-case structural fuzz against reference implementations.
6. The sandbox turns runaway code into a timeout verdict quickly and
   behaves identically under 8-way concurrency.

A live smoke test against a real endpoint is included but off by
default; it runs only when CODELOOP_SMOKE_MODEL is set.
"""
import hashlib
import json
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor

import pytest

from codeloop.gateway import ModelConfig, ReplayGateway
from codeloop.harness import evaluate_records, evaluate_run, ResultRecord
from codeloop.models import (
    Attempt,
    CodeOrigin,
    HiddenTestSet,
    IoStyle,
    Problem,
    RunConfig,
    SampleCase,
    SolveOutcome,
    SourceCode,
    Stage,
    UsageStats,
    VerdictKind,
    ZERO_USAGE,
    merge_usage,
)
from codeloop.orchestrator import call_budget, max_sandbox_runs, solve
from codeloop.parsing import extract_code, parse_debug_response, parse_plan, parse_verdict
from codeloop.sandbox import EvalVerdict, ExecutionLimits, run_sample_tests

from conftest import STUB_SHIM, TemplateGateway, failing_report, passing_report
from test_orchestrator import check_trace_invariants, random_trial, worst_case_calls, worst_case_runs
from test_parsing import (
    _fuzz_document,
    _oracle_blocks,
    _oracle_section,
    MissingSection,
    NoCodeBlock,
)


def make_config(**overrides) -> RunConfig:
    defaults = dict(model=ModelConfig(model_name="m", api_base_url="http://localhost"))
    defaults.update(overrides)
    return RunConfig(**defaults)


# -----------------------------------------------------------------------------
# 1. Worked-example replay
# -----------------------------------------------------------------------------

class RequestSpy:
    """Wraps a gateway and keeps every request that passes through."""

    def __init__(self, inner):
        self.inner = inner
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        return self.inner.complete(request)


def test_worked_example_replay_is_exact(worked_problem, worked_texts):
    from conftest import build_worked_transcript

    transcript, info = build_worked_transcript(worked_problem, worked_texts)
    replay = ReplayGateway(transcript)
    spy = RequestSpy(replay)

    reports = [info["report"], passing_report()]

    def scripted_runner(code):
        return reports.pop(0)

    started = time.perf_counter()
    outcome = solve(worked_problem, make_config(), spy, sample_runner=scripted_runner)
    elapsed = time.perf_counter() - started

    assert elapsed < 1.0, f"replay took {elapsed:.3f}s"

    # Exact event sequence, with the one failing then one passing run.
    assert [e.stage for e in outcome.trace] == [
        Stage.PLAN_GENERATE,
        Stage.PLAN_VERIFY,
        Stage.CODE_GENERATE,
        Stage.SANDBOX_RUN,
        Stage.DEBUG,
        Stage.SANDBOX_RUN,
    ]
    assert [e.passed for e in outcome.trace if e.stage is Stage.SANDBOX_RUN] == [False, True]

    # The verification response reads as a clean bill of health.
    verdict = parse_verdict(worked_texts["verify"])
    assert verdict.kind is VerdictKind.VALID
    assert "No Need to Modify Plan" in worked_texts["verify"]

    # The failing run failed on the empty-range sample.
    [failure] = info["report"].failures
    assert failure.case.assertion == "assert generate_integers(10, 14) == []"

    assert outcome.solved_samples
    assert outcome.usage.api_calls == 4
    assert outcome.final_code.origin is CodeOrigin.DEBUGGING_AGENT

    # Byte-identical prompts: every rendered request equals the transcript's,
    # message for message, in order.
    assert len(spy.requests) == len(transcript.entries) == 4
    for actual, entry in zip(spy.requests, transcript.entries):
        assert actual.messages == entry.request.messages
    assert replay.fully_consumed


# -----------------------------------------------------------------------------
# 2. Budget bounds under randomized chaos
# -----------------------------------------------------------------------------

def test_budget_bounds_hold_across_200_randomized_trials():
    rng = random.Random(91_210)
    started = time.perf_counter()
    for _ in range(200):
        config, outcome = random_trial(rng)
        assert 1 <= config.p <= 5 and 0 <= config.d <= 5
        check_trace_invariants(config, outcome)
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0, f"200 trials took {elapsed:.1f}s"


# -----------------------------------------------------------------------------
# 3. Worst-case call counts vs a hand-written step counter
# -----------------------------------------------------------------------------

@pytest.mark.parametrize("p,d,frozen_calls", [(5, 5, 45), (3, 3, 21), (3, 5, 27)])
def test_worst_case_call_counts_match_hand_counter(p, d, frozen_calls):
    config = make_config(p=p, d=d, codegen_retry=False)
    assert call_budget(config) == worst_case_calls(p, d, retry=False) == frozen_calls
    assert max_sandbox_runs(config) == worst_case_runs(p, d)

    # Drive a real worst-case run: every verdict negative, every repair
    # still failing. The trace must hit the bound exactly, never pass it.
    gateway = TemplateGateway(
        {
            "plan": "### Plan\n1. Do the thing.",
            "verify": "### Simulation\noff by one\n### Plan Evaluation\n**Plan Modification Needed**",
            "refine": "### Plan\n1. Do the thing, correctly.",
            "code": "```Python3\ndef f(x):\n    return x\n```",
            "debug": "### Modified Code\n```Python3\ndef f(x):\n    return x\n```",
        }
    )
    case = SampleCase(assertion="assert f(1) == 1")
    problem = Problem(
        id="worst",
        description="Return the argument.",
        sample_io=(case,),
        hidden_tests=HiddenTestSet(io_style=IoStyle.ASSERTION, cases=(case,)),
        io_style=IoStyle.ASSERTION,
    )
    outcome = solve(
        problem, config, gateway, sample_runner=lambda code: failing_report(case, observed="0")
    )
    assert not outcome.solved_samples
    assert outcome.usage.api_calls == frozen_calls
    runs = sum(1 for e in outcome.trace if e.stage is Stage.SANDBOX_RUN)
    assert runs == max_sandbox_runs(config)
    check_trace_invariants(config, outcome)


# -----------------------------------------------------------------------------
# 4. Scoring equals brute-force recount on 50 synthetic records
# -----------------------------------------------------------------------------

def _digest(seed: str) -> str:
    return hashlib.sha256(seed.encode()).hexdigest()

_EVENT_STAGES = (Stage.PLAN_GENERATE, Stage.PLAN_VERIFY, Stage.CODE_GENERATE, Stage.DEBUG)


def _synthetic_bundle(rng: random.Random, i: int):
    from codeloop.models import AgentEvent

    events = []
    for k in range(rng.randint(1, 9)):
        events.append(
            AgentEvent(
                stage=_EVENT_STAGES[k % len(_EVENT_STAGES)],
                cycle=1 + k // 4,
                round=0,
                request_digest=_digest(f"req-{i}-{k}"),
                response_digest=_digest(f"res-{i}-{k}"),
                usage_delta=UsageStats(
                    api_calls=1,
                    prompt_tokens=rng.randint(50, 900),
                    completion_tokens=rng.randint(20, 400),
                ),
            )
        )
    usage = ZERO_USAGE
    for event in events:
        usage = merge_usage(usage, event.usage_delta)
    solved = rng.random() < 0.5
    code = SourceCode(
        body="def f(x):\n    return x",
        origin=CodeOrigin.CODING_AGENT,
        attempt=Attempt(planning_cycle=1, debug_round=0),
    )
    case = SampleCase(assertion="assert f(1) == 1")
    problem = Problem(
        id=f"syn-{i}",
        description=f"Synthetic problem {i}.",
        sample_io=(case,),
        hidden_tests=HiddenTestSet(io_style=IoStyle.ASSERTION, cases=(case,)),
        io_style=IoStyle.ASSERTION,
    )
    outcome = SolveOutcome(final_code=code, solved_samples=solved, trace=tuple(events), usage=usage)
    detail = passing_report() if solved else failing_report(case, observed="0")
    verdict = EvalVerdict(solved=solved, detail=detail)
    return problem, outcome, verdict


def test_scoring_matches_brute_force_on_50_records():
    rng = random.Random(5050)
    bundles = [_synthetic_bundle(rng, i) for i in range(50)]
    problems = [b[0] for b in bundles]
    outcomes = [b[1] for b in bundles]
    verdicts = [b[2] for b in bundles]

    report = evaluate_run(problems, outcomes, verdicts)

    solved_count = sum(1 for v in verdicts if v.solved)
    assert report.pass_at_1 == solved_count / 50

    # Token aggregate must equal the sum over every trace event, reported
    # in thousands.
    event_tokens = sum(
        e.usage_delta.prompt_tokens + e.usage_delta.completion_tokens
        for o in outcomes
        for e in o.trace
    )
    assert report.avg_tokens_thousands == event_tokens / 50 / 1000.0

    event_calls = sum(e.usage_delta.api_calls for o in outcomes for e in o.trace)
    assert report.avg_api_calls == event_calls / 50

    # The stored-record path recounts to the same aggregate.
    records = [
        ResultRecord(
            problem_id=p.id,
            final_code=o.final_code.body,
            solved_samples=o.solved_samples,
            solved_hidden=v.solved,
            trace=o.trace,
            usage=o.usage,
            wall_time=0.0,
        )
        for p, o, v in bundles
    ]
    recount = evaluate_records(records)
    assert recount.pass_at_1 == report.pass_at_1
    assert recount.avg_tokens_thousands == report.avg_tokens_thousands
    assert recount.avg_api_calls == report.avg_api_calls


# -----------------------------------------------------------------------------
# 5. Parser pinning plus a 1000-case structural fuzz
# -----------------------------------------------------------------------------

def test_parsers_pin_worked_values_and_survive_1000_case_fuzz(worked_texts):
    plan = parse_plan(worked_texts["plan"])
    assert plan.steps.startswith("1. **Define the Function:**")

    verdict = parse_verdict(worked_texts["verify"])
    assert verdict.kind is VerdictKind.VALID
    assert "Range: 2 to 8" in verdict.feedback

    code = extract_code(worked_texts["code"])
    assert code.startswith("def generate_integers(a, b):")

    notes, body = parse_debug_response(worked_texts["debug"])
    assert "for digit in str(number)" in body
    assert notes and "```" not in notes

    rng = random.Random(777_000)
    for _ in range(1000):
        text, has_neg = _fuzz_document(rng)

        expected_plan = _oracle_section(text, "plan", last=True)
        if expected_plan:
            assert parse_plan(text).steps == expected_plan
        else:
            with pytest.raises(MissingSection):
                parse_plan(text)

        fuzz_verdict = parse_verdict(text)
        if has_neg:
            assert fuzz_verdict.kind is VerdictKind.NEEDS_MODIFICATION
        assert fuzz_verdict.feedback.strip()

        blocks = _oracle_blocks(text)
        if blocks:
            assert extract_code(text) == blocks[-1][1].strip("\n")
            _, fuzz_body = parse_debug_response(text)
            assert fuzz_body == blocks[-1][1].strip("\n")
        else:
            with pytest.raises(NoCodeBlock):
                extract_code(text)


# -----------------------------------------------------------------------------
# 6. Sandbox safety: runaway code and concurrency
# -----------------------------------------------------------------------------

RUNAWAY = "# STUB_SLEEP_CASE\nwhile True:\n    pass\n"

VERDICT_MIX = (
    ("", True),
    ("# STUB_WRONG\n", False),
    ("# STUB_RAISE\n", False),
    ("", True),
    ("# STUB_CRASH\n", False),
    ("# STUB_WRONG\n", False),
    ("", True),
    ("# STUB_RAISE\n", False),
)


def _source(body: str) -> SourceCode:
    return SourceCode(
        body=body + "def f(x):\n    return x",
        origin=CodeOrigin.CODING_AGENT,
        attempt=Attempt(planning_cycle=1, debug_round=0),
    )


def test_sandbox_times_out_runaway_code_quickly_and_is_thread_safe():
    case = SampleCase(assertion="assert f(1) == 1")
    limits = ExecutionLimits(per_case_timeout=2.0, total_timeout=3.0)

    started = time.perf_counter()
    report = run_sample_tests(
        _source(RUNAWAY), (case,), IoStyle.ASSERTION, limits, shim_path=STUB_SHIM
    )
    elapsed = time.perf_counter() - started

    assert elapsed < 4.0, f"runaway case took {elapsed:.1f}s"
    assert not report.passed
    assert report.failures[0].category.value == "timeout"
    assert report.failures[0].observed == "TIMEOUT"

    # Identical verdicts whether runs share the process or not.
    fast = ExecutionLimits(per_case_timeout=5.0, total_timeout=20.0)

    def run_one(marker: str):
        return run_sample_tests(
            _source(marker), (case,), IoStyle.ASSERTION, fast, shim_path=STUB_SHIM
        )

    sequential = [run_one(marker).passed for marker, _ in VERDICT_MIX]
    with ThreadPoolExecutor(max_workers=8) as pool:
        concurrent = [r.passed for r in pool.map(run_one, (m for m, _ in VERDICT_MIX))]

    assert sequential == concurrent == [expected for _, expected in VERDICT_MIX]


# -----------------------------------------------------------------------------
# Optional live smoke run (off unless CODELOOP_SMOKE_MODEL is set)
# -----------------------------------------------------------------------------

@pytest.mark.skipif(
    not os.environ.get("CODELOOP_SMOKE_MODEL"),
    reason="live smoke run needs CODELOOP_SMOKE_MODEL plus endpoint credentials",
)
def test_live_smoke_run(tmp_path):
    from codeloop.datasets import DatasetDescriptor, load_records
    from codeloop.harness import RESULTS_FILENAME, run_benchmark

    dataset_path = os.environ["CODELOOP_SMOKE_DATASET"]
    key_env = os.environ.get("CODELOOP_SMOKE_KEY_ENV", "OPENAI_API_KEY")

    records = load_records(dataset_path)[:10]
    slice_path = tmp_path / "slice.jsonl"
    slice_path.write_text("\n".join(json.dumps(r) for r in records), "utf-8")

    config = RunConfig(
        model=ModelConfig(
            model_name=os.environ["CODELOOP_SMOKE_MODEL"],
            api_base_url=os.environ.get("CODELOOP_SMOKE_API_BASE", "https://api.openai.com/v1"),
            api_key_ref=key_env,
        ),
        p=2,
        d=2,
    )
    desc = DatasetDescriptor(name="humaneval", path=slice_path)
    out = tmp_path / "smoke"

    report = run_benchmark(desc, config, parallelism=2, output_dir=out)
    assert len(report.per_problem) == len(records)
    assert report.pass_at_1 > 0.0, "expected at least one solved problem"

    # Emulate a mid-run kill: drop the tail of the results file, then resume.
    results = out / RESULTS_FILENAME
    lines = results.read_text("utf-8").strip().splitlines()
    keep = lines[: len(lines) // 2]
    results.write_text("\n".join(keep) + "\n", "utf-8")

    resumed = run_benchmark(desc, config, parallelism=2, output_dir=out)
    assert len(resumed.per_problem) == len(records)
    after = results.read_text("utf-8").strip().splitlines()
    assert after[: len(keep)] == keep

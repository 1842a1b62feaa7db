"""Shared fixtures: the worked-example texts, scripted gateways, and the
acceptance summary printer."""
from __future__ import annotations

from pathlib import Path

import pytest

from codeloop.gateway import ChatRequest, ChatResponse, Transcript
from codeloop.models import (
    Attempt,
    CodeOrigin,
    FailureCategory,
    FailureRecord,
    HiddenTestSet,
    IoStyle,
    Problem,
    SampleCase,
    SourceCode,
    TestReport,
    UsageStats,
)
from codeloop.parsing import extract_code, parse_plan
from codeloop.prompts import (
    build_test_log,
    render_code_generation,
    render_debugging,
    render_plan_generation,
    render_plan_verification,
)

FIXTURES = Path(__file__).parent / "fixtures"
APPENDIX = FIXTURES / "appendix"
SHIMS = FIXTURES / "shims"

STUB_SHIM = SHIMS / "stub_shim.py"
HANG_SHIM = SHIMS / "hang_shim.py"
GARBAGE_SHIM = SHIMS / "garbage_shim.py"
SLOW_SHIM = SHIMS / "slow_shim.py"

REAL_SHIM = Path(__file__).parent.parent / "shim" / "caseshim.py"


def _read(name: str) -> str:
    return (APPENDIX / name).read_text("utf-8")


@pytest.fixture(scope="session")
def worked_texts() -> dict:
    return {
        "problem": _read("problem.txt"),
        "plan": _read("response_plan.txt"),
        "verify": _read("response_verify.txt"),
        "code": _read("response_code.txt"),
        "debug": _read("response_debug.txt"),
    }


WORKED_SAMPLES = (
    SampleCase(assertion="assert generate_integers(2, 8) == [2, 4, 6, 8]"),
    SampleCase(assertion="assert generate_integers(8, 2) == [2, 4, 6, 8]"),
    SampleCase(assertion="assert generate_integers(10, 14) == []"),
)


@pytest.fixture(scope="session")
def worked_problem(worked_texts) -> Problem:
    return Problem(
        id="even-digits-range",
        description=worked_texts["problem"].strip(),
        sample_io=WORKED_SAMPLES,
        hidden_tests=HiddenTestSet(io_style=IoStyle.ASSERTION, cases=WORKED_SAMPLES),
        io_style=IoStyle.ASSERTION,
    )


def usage_one() -> UsageStats:
    return UsageStats(api_calls=1, prompt_tokens=100, completion_tokens=200)


def failing_report(case: SampleCase, observed: str = "[10, 12, 14]") -> TestReport:
    record = FailureRecord(case=case, observed=observed, category=FailureCategory.WRONG_OUTPUT)
    report = TestReport(passed=False, failures=(record,), raw_log="")
    return TestReport(passed=False, failures=(record,), raw_log=build_test_log(report))


def passing_report() -> TestReport:
    return TestReport(passed=True, failures=(), raw_log="")


def build_worked_transcript(problem: Problem, texts: dict) -> tuple[Transcript, dict]:
    """Pair each prompt this package renders for the worked example with its
    fixture response, exactly as a live session would have seen them."""
    plan_req = render_plan_generation(problem)
    plan_obj = parse_plan(texts["plan"])
    verify_req = render_plan_verification(problem, plan_obj)
    code_req = render_code_generation(problem, plan_obj)
    first_code = SourceCode(
        body=extract_code(texts["code"]),
        origin=CodeOrigin.CODING_AGENT,
        attempt=Attempt(1, 0),
    )
    report = failing_report(problem.sample_io[2])
    debug_req = render_debugging(problem, plan_obj, first_code, report)

    pairs = [
        (plan_req, texts["plan"]),
        (verify_req, texts["verify"]),
        (code_req, texts["code"]),
        (debug_req, texts["debug"]),
    ]
    entries = tuple(
        Transcript.pair(req, ChatResponse(content=content, usage=usage_one()))
        for req, content in pairs
    )
    expected = {
        "plan": plan_obj,
        "first_code": first_code,
        "report": report,
        "requests": [req for req, _ in pairs],
    }
    return Transcript(entries=entries), expected


class SequenceGateway:
    """Returns canned response texts in order; fails loudly when exhausted."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.requests: list[ChatRequest] = []

    @property
    def calls(self) -> int:
        return len(self.requests)

    def complete(self, request: ChatRequest) -> ChatResponse:
        self.requests.append(request)
        if not self.responses:
            raise AssertionError("scripted gateway exhausted")
        return ChatResponse(content=self.responses.pop(0), usage=usage_one())


class TemplateGateway:
    """Classifies each request by its template's opening phrase and returns
    the configured response for that agent role."""

    PHRASES = (
        ("refining a plan", "refine"),
        ("verifying a plan", "verify"),
        ("generating appropriate plan", "plan"),
        ("implement code", "code"),
        ("fails to pass certain test cases", "debug"),
    )

    def __init__(self, responses: dict):
        self.responses = dict(responses)
        self.requests: list[ChatRequest] = []
        self.kinds: list[str] = []

    @property
    def calls(self) -> int:
        return len(self.requests)

    def classify(self, request: ChatRequest) -> str:
        text = request.messages[-1].content
        for phrase, kind in self.PHRASES:
            if phrase in text:
                return kind
        raise AssertionError(f"unclassifiable request: {text[:80]!r}")

    def complete(self, request: ChatRequest) -> ChatResponse:
        kind = self.classify(request)
        self.requests.append(request)
        self.kinds.append(kind)
        value = self.responses[kind]
        if isinstance(value, list):
            if not value:
                raise AssertionError(f"no scripted responses left for {kind!r}")
            content = value.pop(0)
        else:
            content = value
        return ChatResponse(content=content, usage=usage_one())


# =============================================================================
# Acceptance summary: one line per criterion at the end of the run
# =============================================================================

_acceptance: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        _acceptance[name] = report.outcome
    elif report.when == "setup" and report.outcome != "passed":
        _acceptance[name] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    marks = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}
    for name in sorted(_acceptance):
        mark = marks.get(_acceptance[name], _acceptance[name].upper())
        terminalreporter.write_line(f"{mark}  {name}")

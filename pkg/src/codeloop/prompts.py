"""Prompt rendering for the five agent stages.

Templates live as text assets under templates/, one per stage, so the exact
wording is auditable without touching code. Placeholders are single-brace
names ({problem}, {plan}, {code}, {feedback}, {test_log}, {language}),
substituted in one pass so braces inside problem statements or code survive
untouched. Every render is pure and produces a fresh single-turn user
request.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .gateway import ChatRequest, user_request
from .models import (
    FailureCategory,
    FailureRecord,
    Plan,
    Problem,
    SourceCode,
    Stage,
    TestReport,
)

__all__ = [
    "DEFAULT_LANGUAGE",
    "PromptTemplate",
    "load_template",
    "render_plan_generation",
    "render_plan_verification",
    "render_plan_refinement",
    "render_code_generation",
    "render_debugging",
    "with_fence_reminder",
    "format_failure_line",
    "build_test_log",
    "TEST_REPORT_HEADER",
]

DEFAULT_LANGUAGE = "Python3"

TEST_REPORT_HEADER = "Test Cases where the generated code failed to generate the expected output:"

_TEMPLATE_FILES = {
    Stage.PLAN_GENERATE: "plan_generation.txt",
    Stage.PLAN_VERIFY: "plan_verification.txt",
    Stage.PLAN_REFINE: "plan_refinement.txt",
    Stage.CODE_GENERATE: "code_generation.txt",
    Stage.DEBUG: "debugging.txt",
}

_PLACEHOLDER_RE = re.compile(r"\{(problem|plan|code|feedback|test_log|language)\}")

_FENCE_REMINDER = (
    "\n\nYour previous response did not contain a fenced code block. "
    "Respond again with only the code, enclosed within triple backticks (```)."
)


@dataclass(frozen=True)
class PromptTemplate:
    stage: Stage
    body: str

    @property
    def placeholders(self) -> frozenset[str]:
        return frozenset(_PLACEHOLDER_RE.findall(self.body))

    def render(self, **bindings: str) -> str:
        """One-pass substitution; unbound placeholders are an error."""
        missing = self.placeholders - set(bindings)
        if missing:
            raise KeyError(f"unbound placeholders: {sorted(missing)}")
        return _PLACEHOLDER_RE.sub(lambda m: bindings[m.group(1)], self.body)


@lru_cache(maxsize=None)
def load_template(stage: Stage) -> PromptTemplate:
    name = _TEMPLATE_FILES[stage]
    body = resources.files("codeloop").joinpath("templates", name).read_text("utf-8")
    return PromptTemplate(stage=stage, body=body.rstrip("\n"))


# =============================================================================
# Renders
# =============================================================================

def render_plan_generation(problem: Problem, language: str = DEFAULT_LANGUAGE) -> ChatRequest:
    if not problem.description.strip():
        raise ValueError("cannot plan for an empty problem description")
    text = load_template(Stage.PLAN_GENERATE).render(
        problem=problem.description, language=language
    )
    return user_request(text)


def render_plan_verification(
    problem: Problem, plan: Plan, language: str = DEFAULT_LANGUAGE
) -> ChatRequest:
    if not plan.steps.strip():
        raise ValueError("cannot verify an empty plan")
    text = load_template(Stage.PLAN_VERIFY).render(
        problem=problem.description, plan=plan.steps, language=language
    )
    return user_request(text)


def render_plan_refinement(
    problem: Problem, plan: Plan, feedback: str, language: str = DEFAULT_LANGUAGE
) -> ChatRequest:
    if not feedback.strip():
        raise ValueError("refinement requires non-empty feedback")
    text = load_template(Stage.PLAN_REFINE).render(
        problem=problem.description, plan=plan.steps, feedback=feedback, language=language
    )
    return user_request(text)


def render_code_generation(
    problem: Problem, plan: Plan, language: str = DEFAULT_LANGUAGE
) -> ChatRequest:
    if not plan.steps.strip():
        raise ValueError("cannot generate code from an empty plan")
    text = load_template(Stage.CODE_GENERATE).render(
        problem=problem.description, plan=plan.steps, language=language
    )
    return user_request(text)


def render_debugging(
    problem: Problem,
    plan: Plan,
    code: SourceCode,
    report: TestReport,
    language: str = DEFAULT_LANGUAGE,
) -> ChatRequest:
    if report.passed:
        raise ValueError("nothing to debug: the report passed")
    text = load_template(Stage.DEBUG).render(
        problem=problem.description,
        plan=plan.steps,
        code=code.body,
        test_log=build_test_log(report),
        language=language,
    )
    return user_request(text)


def with_fence_reminder(request: ChatRequest) -> ChatRequest:
    """The retry request after a fence-less code response."""
    return user_request(request.messages[-1].content + _FENCE_REMINDER)


# =============================================================================
# Failure formatting for the debugging prompt
# =============================================================================

def format_failure_line(record: FailureRecord) -> str:
    """One report line per failure, in the shape the debugging prompt expects.

    Assertion cases quote the assertion itself; error context is appended
    for non-output failures. Stdin cases pack input, expected, and observed
    into one line using reprs so multi-line payloads stay on one line.
    """
    case = record.case
    if case.assertion is not None:
        if record.category is FailureCategory.WRONG_OUTPUT:
            return case.assertion
        if record.category is FailureCategory.TIMEOUT:
            return f"{case.assertion}  (TIMEOUT)"
        return f"{case.assertion}  ({record.category.value}: {record.observed})"
    observed = "TIMEOUT" if record.category is FailureCategory.TIMEOUT else repr(record.observed)
    return (
        f"Input: {case.stdin!r}  Expected Output: {case.expected_stdout!r}  "
        f"Your Output: {observed}"
    )


def build_test_log(report: TestReport) -> str:
    """All failure lines, newline-joined, in case order."""
    return "\n".join(format_failure_line(f) for f in report.failures)

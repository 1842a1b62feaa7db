"""The three agents: planning (generate, verify by simulation, refine at most
once), coding (one call plus an optional fence retry), and debugging (exactly
one call per round).

Call accounting is strict. plan issues 2 or 3 gateway calls, generate_code
1 or 2, debug exactly 1; every gateway call emits exactly one AgentEvent to
the context's sink. None of the agents ever asks the model for additional
test cases.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

from .gateway import ChatRequest, ChatResponse, Gateway, ModelConfig
from .models import (
    AgentEvent,
    Attempt,
    CodeOrigin,
    EventSink,
    Plan,
    Problem,
    SourceCode,
    Stage,
    TestReport,
    UsageStats,
    merge_usage,
)
from .parsing import MissingSection, NoCodeBlock, extract_code, parse_debug_response, parse_plan, parse_verdict
from .prompts import (
    DEFAULT_LANGUAGE,
    render_code_generation,
    render_debugging,
    render_plan_generation,
    render_plan_refinement,
    render_plan_verification,
    with_fence_reminder,
)

__all__ = [
    "AgentContext",
    "AgentFailure",
    "PlanningFailed",
    "CodegenFailed",
    "DebugFailed",
    "plan",
    "generate_code",
    "debug",
]


class AgentFailure(Exception):
    """An agent could not produce its artifact; the budget was still spent."""

    def __init__(self, message: str, usage: UsageStats):
        super().__init__(message)
        self.usage = usage


class PlanningFailed(AgentFailure):
    """No parsable plan, even after refinement. The cycle is abandoned."""


class CodegenFailed(AgentFailure):
    """No fenced code block, even after the retry."""


class DebugFailed(AgentFailure):
    """A debug response without code. The round is consumed."""


@dataclass
class AgentContext:
    """Everything an agent needs to talk to the model and report progress."""

    gateway: Gateway
    model: Optional[ModelConfig] = None
    event_sink: Optional[EventSink] = None
    codegen_retry: bool = True
    language: str = DEFAULT_LANGUAGE


def _content_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _issue(
    ctx: AgentContext, stage: Stage, cycle: int, round_: int, request: ChatRequest
) -> ChatResponse:
    response = ctx.gateway.complete(request)
    event = AgentEvent(
        stage=stage,
        cycle=cycle,
        round=round_,
        request_digest=request.digest,
        response_digest=_content_digest(response.content),
        usage_delta=response.usage,
    )
    if ctx.event_sink is not None:
        ctx.event_sink(event)
    return response


# =============================================================================
# Planning
# =============================================================================

def plan(ctx: AgentContext, problem: Problem, cycle: int = 1) -> tuple[Plan, UsageStats]:
    """Generate a plan, verify it by step-by-step simulation, and refine it
    at most once when the verdict is negative.

    The refined plan is not re-verified; a negative verdict costs exactly
    one extra call. An unparsable plan (initially, or after refinement)
    raises PlanningFailed and abandons the cycle.
    """
    request = render_plan_generation(problem, ctx.language)
    response = _issue(ctx, Stage.PLAN_GENERATE, cycle, 0, request)
    usage = response.usage
    try:
        plan_obj = parse_plan(response.content)
    except MissingSection as exc:
        raise PlanningFailed(f"planning response unusable: {exc}", usage) from exc

    verify_request = render_plan_verification(problem, plan_obj, ctx.language)
    verify_response = _issue(ctx, Stage.PLAN_VERIFY, cycle, 0, verify_request)
    usage = merge_usage(usage, verify_response.usage)
    verdict = parse_verdict(verify_response.content)

    if verdict.needs_modification:
        refine_request = render_plan_refinement(problem, plan_obj, verdict.feedback, ctx.language)
        refine_response = _issue(ctx, Stage.PLAN_REFINE, cycle, 0, refine_request)
        usage = merge_usage(usage, refine_response.usage)
        try:
            plan_obj = parse_plan(refine_response.content)
        except MissingSection as exc:
            raise PlanningFailed(f"refined plan unusable: {exc}", usage) from exc

    return plan_obj, usage


# =============================================================================
# Coding
# =============================================================================

def generate_code(
    ctx: AgentContext, problem: Problem, plan_obj: Plan, cycle: int = 1
) -> tuple[SourceCode, UsageStats]:
    """Translate the plan into code. A fence-less response earns one
    immediate retry with an explicit formatting reminder (disable via
    ctx.codegen_retry); a second miss raises CodegenFailed."""
    request = render_code_generation(problem, plan_obj, ctx.language)
    response = _issue(ctx, Stage.CODE_GENERATE, cycle, 0, request)
    usage = response.usage
    try:
        body = extract_code(response.content)
    except NoCodeBlock:
        if not ctx.codegen_retry:
            raise CodegenFailed("code response had no fenced block", usage) from None
        retry = with_fence_reminder(request)
        retry_response = _issue(ctx, Stage.CODE_GENERATE, cycle, 0, retry)
        usage = merge_usage(usage, retry_response.usage)
        try:
            body = extract_code(retry_response.content)
        except NoCodeBlock as exc:
            raise CodegenFailed("no fenced block after retry", usage) from exc

    code = SourceCode(body=body, origin=CodeOrigin.CODING_AGENT, attempt=Attempt(cycle, 0))
    return code, usage


# =============================================================================
# Debugging
# =============================================================================

def debug(
    ctx: AgentContext,
    problem: Problem,
    plan_obj: Plan,
    code: SourceCode,
    report: TestReport,
    cycle: int = 1,
    round_: int = 1,
) -> tuple[SourceCode, UsageStats]:
    """One repair call against the latest failing report.

    The prompt embeds the original plan and the full failure list. The model
    may return identical code; no sameness check is made, the next sandbox
    run decides.
    """
    request = render_debugging(problem, plan_obj, code, report, ctx.language)
    response = _issue(ctx, Stage.DEBUG, cycle, round_, request)
    usage = response.usage
    try:
        _notes, body = parse_debug_response(response.content)
    except NoCodeBlock as exc:
        raise DebugFailed("debug response had no fenced block", usage) from exc

    fixed = SourceCode(body=body, origin=CodeOrigin.DEBUGGING_AGENT, attempt=Attempt(cycle, round_))
    return fixed, usage

"""Shared vocabulary types: problems, plans, code, test results, config, usage.

Everything here is an immutable value with a canonical JSON form. No I/O.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, TYPE_CHECKING

if TYPE_CHECKING:
    from .gateway import ModelConfig

__all__ = [
    "IoStyle",
    "CodeOrigin",
    "Stage",
    "FailureCategory",
    "VerdictKind",
    "SampleCase",
    "HiddenTestSet",
    "Problem",
    "Plan",
    "PlanVerdict",
    "Attempt",
    "SourceCode",
    "FailureRecord",
    "TestReport",
    "RunConfig",
    "UsageStats",
    "AgentEvent",
    "SolveOutcome",
    "merge_usage",
    "validate_problem",
    "truncate_observed",
    "OBSERVED_MAX_CHARS",
]

# Cap on failure output entering prompts; unbounded stdout would explode token cost.
OBSERVED_MAX_CHARS = 2000


# =============================================================================
# Enums
# =============================================================================

class IoStyle(str, enum.Enum):
    """How a problem's cases drive the candidate program."""

    ASSERTION = "assertion"
    STDIN_STDOUT = "stdin_stdout"


class CodeOrigin(str, enum.Enum):
    CODING_AGENT = "coding_agent"
    DEBUGGING_AGENT = "debugging_agent"


class Stage(str, enum.Enum):
    """Trace event kinds, one per orchestrated step."""

    PLAN_GENERATE = "plan_generate"
    PLAN_VERIFY = "plan_verify"
    PLAN_REFINE = "plan_refine"
    CODE_GENERATE = "code_generate"
    SANDBOX_RUN = "sandbox_run"
    DEBUG = "debug"


class FailureCategory(str, enum.Enum):
    WRONG_OUTPUT = "wrong_output"
    RUNTIME_ERROR = "runtime_error"
    TIMEOUT = "timeout"
    CRASH = "crash"


class VerdictKind(str, enum.Enum):
    VALID = "valid"
    NEEDS_MODIFICATION = "needs_modification"


# =============================================================================
# Problems and cases
# =============================================================================

@dataclass(frozen=True)
class SampleCase:
    """One test case: either an assertion or a stdin/expected-stdout pair."""

    assertion: Optional[str] = None
    stdin: Optional[str] = None
    expected_stdout: Optional[str] = None

    def __post_init__(self) -> None:
        has_assertion = self.assertion is not None
        has_pair = self.stdin is not None and self.expected_stdout is not None
        has_partial_pair = (self.stdin is None) != (self.expected_stdout is None)
        if has_partial_pair or has_assertion == has_pair:
            raise ValueError(
                "exactly one of {assertion} or {stdin, expected_stdout} must be set"
            )

    @property
    def style(self) -> IoStyle:
        return IoStyle.ASSERTION if self.assertion is not None else IoStyle.STDIN_STDOUT

    def to_dict(self) -> dict[str, Any]:
        if self.assertion is not None:
            return {"assertion": self.assertion}
        return {"stdin": self.stdin, "expected_stdout": self.expected_stdout}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SampleCase":
        return cls(
            assertion=data.get("assertion"),
            stdin=data.get("stdin"),
            expected_stdout=data.get("expected_stdout"),
        )


@dataclass(frozen=True)
class HiddenTestSet:
    """Cases used only for final scoring. Never shown to any agent."""

    io_style: IoStyle
    cases: tuple[SampleCase, ...] = ()

    def __len__(self) -> int:
        return len(self.cases)

    def to_dict(self) -> dict[str, Any]:
        return {
            "io_style": self.io_style.value,
            "cases": [c.to_dict() for c in self.cases],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "HiddenTestSet":
        return cls(
            io_style=IoStyle(data["io_style"]),
            cases=tuple(SampleCase.from_dict(c) for c in data["cases"]),
        )


@dataclass(frozen=True)
class Problem:
    """One benchmark task."""

    id: str
    description: str
    sample_io: tuple[SampleCase, ...]
    hidden_tests: HiddenTestSet
    io_style: IoStyle
    extras: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "description": self.description,
            "sample_io": [c.to_dict() for c in self.sample_io],
            "hidden_tests": self.hidden_tests.to_dict(),
            "io_style": self.io_style.value,
            "extras": dict(self.extras),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Problem":
        return cls(
            id=data["id"],
            description=data["description"],
            sample_io=tuple(SampleCase.from_dict(c) for c in data["sample_io"]),
            hidden_tests=HiddenTestSet.from_dict(data["hidden_tests"]),
            io_style=IoStyle(data["io_style"]),
            extras=dict(data.get("extras", {})),
        )


def validate_problem(p: Problem) -> list[str]:
    """Check Problem invariants; violations come back as data, never raised."""
    violations: list[str] = []
    if not p.id:
        violations.append("empty id")
    if not p.description.strip():
        violations.append("empty description")
    for i, case in enumerate(p.sample_io):
        if case.style is not p.io_style:
            violations.append(f"case {i}: style mismatch")
    for i, case in enumerate(p.hidden_tests.cases):
        if case.style is not p.hidden_tests.io_style:
            violations.append(f"hidden case {i}: style mismatch")
    if len(p.hidden_tests) == 0:
        violations.append("no hidden tests")
    return violations


# =============================================================================
# Plans
# =============================================================================

@dataclass(frozen=True)
class Plan:
    """Parsed planning response. Raw text is kept because downstream prompts
    re-quote the step list verbatim."""

    understanding: str
    exemplar: str
    algorithm: str
    steps: str
    raw: str

    def __post_init__(self) -> None:
        if not self.steps.strip():
            raise ValueError("plan steps must be non-empty")
        if self.steps not in self.raw:
            raise ValueError("raw must contain steps as a substring")

    def to_dict(self) -> dict[str, Any]:
        return {
            "understanding": self.understanding,
            "exemplar": self.exemplar,
            "algorithm": self.algorithm,
            "steps": self.steps,
            "raw": self.raw,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Plan":
        return cls(
            understanding=data["understanding"],
            exemplar=data["exemplar"],
            algorithm=data["algorithm"],
            steps=data["steps"],
            raw=data["raw"],
        )


@dataclass(frozen=True)
class PlanVerdict:
    kind: VerdictKind
    feedback: str

    def __post_init__(self) -> None:
        if self.kind is VerdictKind.NEEDS_MODIFICATION and not self.feedback.strip():
            raise ValueError("a negative verdict requires non-empty feedback")

    @property
    def needs_modification(self) -> bool:
        return self.kind is VerdictKind.NEEDS_MODIFICATION

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "feedback": self.feedback}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PlanVerdict":
        return cls(kind=VerdictKind(data["kind"]), feedback=data["feedback"])


# =============================================================================
# Code
# =============================================================================

@dataclass(frozen=True)
class Attempt:
    """Where in the run a piece of code was produced.

    Cycles are 1-based, debug rounds 0-based; round 0 is the freshly
    generated code before any debugging.
    """

    planning_cycle: int
    debug_round: int

    def __post_init__(self) -> None:
        if self.planning_cycle < 1:
            raise ValueError("planning_cycle must be >= 1")
        if self.debug_round < 0:
            raise ValueError("debug_round must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {"planning_cycle": self.planning_cycle, "debug_round": self.debug_round}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Attempt":
        return cls(planning_cycle=data["planning_cycle"], debug_round=data["debug_round"])


@dataclass(frozen=True)
class SourceCode:
    body: str
    origin: CodeOrigin
    attempt: Attempt

    def __post_init__(self) -> None:
        if not self.body.strip():
            raise ValueError("code body must be non-empty")
        from_coder = self.origin is CodeOrigin.CODING_AGENT
        if from_coder != (self.attempt.debug_round == 0):
            raise ValueError("debug_round must be 0 exactly when origin is coding_agent")

    def to_dict(self) -> dict[str, Any]:
        return {
            "body": self.body,
            "origin": self.origin.value,
            "attempt": self.attempt.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SourceCode":
        return cls(
            body=data["body"],
            origin=CodeOrigin(data["origin"]),
            attempt=Attempt.from_dict(data["attempt"]),
        )


# =============================================================================
# Test results
# =============================================================================

def truncate_observed(text: str, limit: int = OBSERVED_MAX_CHARS) -> str:
    if len(text) <= limit:
        return text
    suffix = "...[truncated]"
    if limit <= len(suffix):
        return text[:limit]
    return text[: limit - len(suffix)] + suffix


@dataclass(frozen=True)
class FailureRecord:
    case: SampleCase
    observed: str
    category: FailureCategory

    def __post_init__(self) -> None:
        if self.category is FailureCategory.TIMEOUT and self.observed != "TIMEOUT":
            raise ValueError('timeout failures must carry observed == "TIMEOUT"')

    def to_dict(self) -> dict[str, Any]:
        return {
            "case": self.case.to_dict(),
            "observed": self.observed,
            "category": self.category.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FailureRecord":
        return cls(
            case=SampleCase.from_dict(data["case"]),
            observed=data["observed"],
            category=FailureCategory(data["category"]),
        )


@dataclass(frozen=True)
class TestReport:
    passed: bool
    failures: tuple[FailureRecord, ...]
    raw_log: str

    def __post_init__(self) -> None:
        if self.passed != (len(self.failures) == 0):
            raise ValueError("passed must hold exactly when failures is empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "failures": [f.to_dict() for f in self.failures],
            "raw_log": self.raw_log,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TestReport":
        return cls(
            passed=data["passed"],
            failures=tuple(FailureRecord.from_dict(f) for f in data["failures"]),
            raw_log=data["raw_log"],
        )


# =============================================================================
# Configuration
# =============================================================================

@dataclass(frozen=True)
class RunConfig:
    """Budgets and knobs for one solve.

    p bounds planning cycles, d bounds debugging rounds per cycle. The
    overall work is therefore O(p*d).
    """

    model: "ModelConfig"
    p: int = 5
    d: int = 5
    per_case_timeout: float = 10.0
    total_sandbox_timeout: float = 60.0
    codegen_retry: bool = True
    max_wall_seconds: float = 1200.0

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.d < 0:
            raise ValueError("d must be >= 0")
        if self.per_case_timeout <= 0 or self.total_sandbox_timeout <= 0:
            raise ValueError("timeouts must be positive")
        if self.max_wall_seconds <= 0:
            raise ValueError("max_wall_seconds must be positive")


# =============================================================================
# Usage accounting
# =============================================================================

@dataclass(frozen=True)
class UsageStats:
    """Additive API usage counters. `estimated` marks token counts derived
    from character length rather than reported by the endpoint."""

    api_calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    estimated: bool = False

    def __post_init__(self) -> None:
        if min(self.api_calls, self.prompt_tokens, self.completion_tokens) < 0:
            raise ValueError("usage counters must be non-negative")

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self) -> dict[str, Any]:
        return {
            "api_calls": self.api_calls,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "estimated": self.estimated,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "UsageStats":
        return cls(
            api_calls=data["api_calls"],
            prompt_tokens=data["prompt_tokens"],
            completion_tokens=data["completion_tokens"],
            estimated=data.get("estimated", False),
        )

    @staticmethod
    def estimate_tokens(text: str) -> int:
        """Fallback token estimate when an endpoint reports no usage."""
        return math.ceil(len(text) / 4)


ZERO_USAGE = UsageStats()


def merge_usage(a: UsageStats, b: UsageStats) -> UsageStats:
    """Componentwise sum; associative, commutative, identity ZERO_USAGE."""
    return UsageStats(
        api_calls=a.api_calls + b.api_calls,
        prompt_tokens=a.prompt_tokens + b.prompt_tokens,
        completion_tokens=a.completion_tokens + b.completion_tokens,
        estimated=a.estimated or b.estimated,
    )


# =============================================================================
# Traces and outcomes
# =============================================================================

@dataclass(frozen=True)
class AgentEvent:
    """One step of a solve: an LLM call or a sandbox run.

    `passed` is set only on sandbox_run events. Digests identify request and
    response content without storing it.
    """

    stage: Stage
    cycle: int
    round: int
    request_digest: str
    response_digest: str
    usage_delta: UsageStats
    passed: Optional[bool] = None

    def __post_init__(self) -> None:
        if (self.passed is not None) != (self.stage is Stage.SANDBOX_RUN):
            raise ValueError("passed is set on sandbox_run events and only there")

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "stage": self.stage.value,
            "cycle": self.cycle,
            "round": self.round,
            "request_digest": self.request_digest,
            "response_digest": self.response_digest,
            "usage_delta": self.usage_delta.to_dict(),
        }
        if self.passed is not None:
            data["passed"] = self.passed
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AgentEvent":
        return cls(
            stage=Stage(data["stage"]),
            cycle=data["cycle"],
            round=data["round"],
            request_digest=data["request_digest"],
            response_digest=data["response_digest"],
            usage_delta=UsageStats.from_dict(data["usage_delta"]),
            passed=data.get("passed"),
        )


@dataclass(frozen=True)
class SolveOutcome:
    """Final code (None only when no attempt ever parsed), the full event
    trace, and merged usage."""

    final_code: Optional[SourceCode]
    solved_samples: bool
    trace: tuple[AgentEvent, ...]
    usage: UsageStats

    def to_dict(self) -> dict[str, Any]:
        return {
            "final_code": self.final_code.to_dict() if self.final_code else None,
            "solved_samples": self.solved_samples,
            "trace": [e.to_dict() for e in self.trace],
            "usage": self.usage.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SolveOutcome":
        final = data.get("final_code")
        return cls(
            final_code=SourceCode.from_dict(final) if final else None,
            solved_samples=data["solved_samples"],
            trace=tuple(AgentEvent.from_dict(e) for e in data["trace"]),
            usage=UsageStats.from_dict(data["usage"]),
        )


EventSink = Callable[[AgentEvent], None]

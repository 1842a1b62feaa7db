"""Plan, code, and debug agents over chat-completion models, with a sandboxed
judge and a pass@1 benchmark harness."""

__version__ = "0.1.0"

from .models import (
    AgentEvent,
    Attempt,
    CodeOrigin,
    FailureCategory,
    FailureRecord,
    HiddenTestSet,
    IoStyle,
    Plan,
    PlanVerdict,
    Problem,
    RunConfig,
    SampleCase,
    SolveOutcome,
    SourceCode,
    Stage,
    TestReport,
    UsageStats,
    VerdictKind,
    merge_usage,
    validate_problem,
)
from .gateway import (
    ChatRequest,
    ChatResponse,
    Gateway,
    LiveGateway,
    Message,
    ModelConfig,
    RecordingGateway,
    ReplayGateway,
    Transcript,
)
from .orchestrator import call_budget, max_sandbox_runs, solve
from .sandbox import (
    EvalVerdict,
    ExecutionLimits,
    run_hidden_tests,
    run_sample_tests,
)
from .datasets import DatasetDescriptor, SchemaError, load_dataset
from .harness import RunReport, evaluate_run, run_benchmark, solve_one

__all__ = [
    "AgentEvent",
    "Attempt",
    "ChatRequest",
    "ChatResponse",
    "CodeOrigin",
    "DatasetDescriptor",
    "EvalVerdict",
    "ExecutionLimits",
    "FailureCategory",
    "FailureRecord",
    "Gateway",
    "HiddenTestSet",
    "IoStyle",
    "LiveGateway",
    "Message",
    "ModelConfig",
    "Plan",
    "PlanVerdict",
    "Problem",
    "RecordingGateway",
    "ReplayGateway",
    "RunConfig",
    "RunReport",
    "SampleCase",
    "SchemaError",
    "SolveOutcome",
    "SourceCode",
    "Stage",
    "TestReport",
    "Transcript",
    "UsageStats",
    "VerdictKind",
    "call_budget",
    "evaluate_run",
    "load_dataset",
    "max_sandbox_runs",
    "merge_usage",
    "run_benchmark",
    "run_hidden_tests",
    "run_sample_tests",
    "solve",
    "solve_one",
    "validate_problem",
    "__version__",
]

"""Run candidate programs against test cases in an isolated subprocess.

Each run gets a fresh temporary directory holding the solution and a JSON
case manifest; a runner shim (separate component, stdlib-only) is spawned as
`[interpreter, shim_path, manifest_path]` with cwd inside that directory and
emits one JSON verdict per line on stdout. The shim enforces the per-case
timeout; this module enforces the total timeout by killing the whole process
group. Nothing here ever feeds hidden-test content back toward the agents.
"""
from __future__ import annotations

import importlib.util
import json
import logging
import os
import shutil
import signal
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

from .models import (
    FailureCategory,
    FailureRecord,
    HiddenTestSet,
    IoStyle,
    OBSERVED_MAX_CHARS,
    SampleCase,
    SourceCode,
    TestReport,
    truncate_observed,
)
from .prompts import build_test_log

log = logging.getLogger(__name__)

__all__ = [
    "ExecutionLimits",
    "EvalVerdict",
    "SandboxError",
    "ShimProtocolError",
    "SandboxSpawnError",
    "run_sample_tests",
    "run_hidden_tests",
    "resolve_shim_path",
    "normalize_stdout",
    "stdout_matches",
    "SHIM_ENV_VAR",
]

SHIM_ENV_VAR = "CODELOOP_SHIM"

_KILL_GRACE = 2.0

_VALID_STATUSES = frozenset(c.value for c in FailureCategory) | {"pass"}


class SandboxError(Exception):
    """Base for execution-infrastructure failures (not case failures)."""


class ShimProtocolError(SandboxError):
    """The shim's stdout did not follow the one-verdict-per-line contract."""


class SandboxSpawnError(SandboxError):
    """The shim subprocess could not be started or located."""


@dataclass(frozen=True)
class ExecutionLimits:
    per_case_timeout: float = 10.0
    total_timeout: float = 60.0
    max_output_bytes: int = 64 * 1024

    def __post_init__(self) -> None:
        if self.per_case_timeout <= 0 or self.total_timeout <= 0:
            raise ValueError("timeouts must be positive")
        if self.per_case_timeout > self.total_timeout:
            raise ValueError("per_case_timeout must not exceed total_timeout")
        if self.max_output_bytes < 1:
            raise ValueError("max_output_bytes must be positive")


@dataclass(frozen=True)
class EvalVerdict:
    solved: bool
    detail: TestReport

    def __post_init__(self) -> None:
        if self.solved != self.detail.passed:
            raise ValueError("solved must mirror detail.passed")


# =============================================================================
# stdout comparison (contest-style judging)
# =============================================================================

def normalize_stdout(text: str) -> list[str]:
    """Lines with trailing whitespace stripped and trailing blank lines dropped."""
    lines = [line.rstrip() for line in text.splitlines()]
    while lines and lines[-1] == "":
        lines.pop()
    return lines


def stdout_matches(expected: str, actual: str) -> bool:
    return normalize_stdout(expected) == normalize_stdout(actual)


# =============================================================================
# Shim location
# =============================================================================

def resolve_shim_path(explicit: Union[str, Path, None] = None) -> Path:
    """Explicit path, then the CODELOOP_SHIM env var, then an installed
    caseshim module."""
    if explicit is not None:
        return Path(explicit)
    env = os.environ.get(SHIM_ENV_VAR)
    if env:
        return Path(env)
    spec = importlib.util.find_spec("caseshim")
    if spec is not None and spec.origin:
        return Path(spec.origin)
    raise SandboxSpawnError(
        "no runner shim available: pass shim_path, set "
        f"{SHIM_ENV_VAR}, or install the caseshim package"
    )


# =============================================================================
# Execution
# =============================================================================

def _case_entry(case_id: int, case: SampleCase) -> dict:
    if case.assertion is not None:
        return {"id": case_id, "assertion": case.assertion}
    return {"id": case_id, "stdin": case.stdin, "expected_stdout": case.expected_stdout}


def _kill_tree(proc: subprocess.Popen) -> None:
    try:
        os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
    except (ProcessLookupError, PermissionError, OSError):
        proc.kill()


def _spawn_and_collect(
    code_body: str,
    cases: Sequence[SampleCase],
    io_style: IoStyle,
    limits: ExecutionLimits,
    shim: Path,
) -> tuple[list[dict], bool, str]:
    """Run the shim over the cases. Returns (verdict dicts, timed_out, stderr)."""
    workdir = Path(tempfile.mkdtemp(prefix="codeloop-run-"))
    try:
        solution = workdir / "solution.py"
        solution.write_text(code_body if code_body.endswith("\n") else code_body + "\n", "utf-8")
        manifest = {
            "solution_path": str(solution),
            "io_style": io_style.value,
            "cases": [_case_entry(i, c) for i, c in enumerate(cases)],
            "per_case_timeout": limits.per_case_timeout,
        }
        manifest_path = workdir / "manifest.json"
        manifest_path.write_text(json.dumps(manifest), "utf-8")

        try:
            proc = subprocess.Popen(
                [sys.executable, str(shim), str(manifest_path)],
                cwd=workdir,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                start_new_session=True,
            )
        except OSError as exc:
            raise SandboxSpawnError(f"could not start runner shim {shim}: {exc}") from exc

        timed_out = False
        try:
            out, err = proc.communicate(timeout=limits.total_timeout + _KILL_GRACE)
        except subprocess.TimeoutExpired:
            timed_out = True
            _kill_tree(proc)
            out, err = proc.communicate()

        verdicts = []
        lines = (out or "").splitlines()
        for idx, raw_line in enumerate(lines):
            line = raw_line.strip()
            if not line:
                continue
            try:
                verdicts.append(json.loads(line))
            except json.JSONDecodeError:
                if timed_out and idx == len(lines) - 1:
                    continue  # a kill can shear the final line mid-write
                raise ShimProtocolError(f"shim emitted a non-JSON line: {line[:120]!r}")
        if not timed_out and proc.returncode != 0 and len(verdicts) < len(cases):
            tail = (err or "")[-400:]
            raise ShimProtocolError(
                f"shim exited with {proc.returncode} before finishing (stderr tail: {tail!r})"
            )
        return verdicts, timed_out, err or ""
    finally:
        shutil.rmtree(workdir, ignore_errors=True)


def _build_report(
    cases: Sequence[SampleCase],
    verdicts: list[dict],
    timed_out: bool,
    limits: ExecutionLimits,
) -> TestReport:
    by_id: dict[int, dict] = {}
    for v in verdicts:
        if not isinstance(v, dict) or "id" not in v or "status" not in v:
            raise ShimProtocolError(f"malformed verdict record: {v!r}")
        case_id = v["id"]
        if not isinstance(case_id, int) or not (0 <= case_id < len(cases)):
            raise ShimProtocolError(f"verdict for unknown case id {case_id!r}")
        if case_id in by_id:
            raise ShimProtocolError(f"duplicate verdict for case id {case_id}")
        if v["status"] not in _VALID_STATUSES:
            raise ShimProtocolError(f"unknown verdict status {v['status']!r}")
        by_id[case_id] = v

    failures: list[FailureRecord] = []
    for i, case in enumerate(cases):
        verdict = by_id.get(i)
        if verdict is None:
            if not timed_out:
                raise ShimProtocolError(f"no verdict for case {i}")
            # The total-timeout kill ate the remaining cases.
            verdict = {"status": "timeout", "observed": "TIMEOUT"}
        status = verdict["status"]
        if status == "pass":
            continue
        category = FailureCategory(status)
        observed = str(verdict.get("observed", ""))[: limits.max_output_bytes]
        observed = truncate_observed(observed, OBSERVED_MAX_CHARS)
        if category is FailureCategory.TIMEOUT:
            observed = "TIMEOUT"
        failures.append(FailureRecord(case=case, observed=observed, category=category))

    report = TestReport(passed=not failures, failures=tuple(failures), raw_log="")
    # raw_log mirrors exactly what the debugging prompt will quote.
    return TestReport(passed=report.passed, failures=report.failures, raw_log=build_test_log(report))


def run_sample_tests(
    code: SourceCode,
    cases: Sequence[SampleCase],
    io_style: IoStyle,
    limits: ExecutionLimits,
    shim_path: Union[str, Path, None] = None,
) -> TestReport:
    """Judge code against visible cases. Zero cases is a vacuous pass: the
    adaptive loop then keeps the first generated code."""
    if not cases:
        return TestReport(passed=True, failures=(), raw_log="")
    shim = resolve_shim_path(shim_path)
    verdicts, timed_out, _stderr = _spawn_and_collect(code.body, cases, io_style, limits, shim)
    return _build_report(cases, verdicts, timed_out, limits)


def run_hidden_tests(
    code: SourceCode,
    hidden: HiddenTestSet,
    limits: ExecutionLimits,
    shim_path: Union[str, Path, None] = None,
) -> EvalVerdict:
    """Judge code against scoring cases. The resulting report never reaches
    a prompt; it exists for pass@1 only."""
    if len(hidden) == 0:
        raise ValueError("hidden test set must be non-empty")
    shim = resolve_shim_path(shim_path)
    verdicts, timed_out, _stderr = _spawn_and_collect(
        code.body, hidden.cases, hidden.io_style, limits, shim
    )
    report = _build_report(hidden.cases, verdicts, timed_out, limits)
    return EvalVerdict(solved=report.passed, detail=report)

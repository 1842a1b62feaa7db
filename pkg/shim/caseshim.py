"""In-sandbox test runner: executes a case manifest against one candidate
solution and prints one JSON verdict per case, in manifest order.

    python caseshim.py MANIFEST_JSON

Manifest shape:

    {"solution_path": "...", "io_style": "assertion" | "stdin_stdout",
     "cases": [{"id": 0, "assertion": "..."} |
               {"id": 0, "stdin": "...", "expected_stdout": "..."}],
     "per_case_timeout": 10.0}

Each verdict line is {"id": ..., "status": ..., "observed": ...} with status
one of pass, wrong_output, runtime_error, timeout, crash. Exactly one verdict
is emitted per case even when the solution hangs or kills its process, and a
passing case always has an empty observed field.

Assertion cases run inside a child worker process, never in this process, so
a solution calling os._exit or segfaulting cannot stop verdict emission: the
parent notices the death, reports the current case as a crash, and respawns
the worker at the next case. Timeouts work the same way, with the parent as
the timer. Stdin cases get a fresh interpreter per case.

The exit code is 0 whenever the protocol completed, whatever the verdicts
say. Stdlib only; this file must stay runnable standalone.
"""
import ast
import io
import json
import os
import queue
import signal
import subprocess
import sys
import tempfile
import threading

OBSERVED_CAP = 4096
# Parent-side deadline padding over per_case_timeout: worker spawn and module
# import are paid by the first case a worker serves.
CASE_GRACE = 1.0

PASS = "pass"
WRONG_OUTPUT = "wrong_output"
RUNTIME_ERROR = "runtime_error"
TIMEOUT = "timeout"
CRASH = "crash"


def _clip(text: str) -> str:
    return text if len(text) <= OBSERVED_CAP else text[:OBSERVED_CAP]


def _verdict(case_id, status: str, observed: str = "") -> dict:
    return {"id": case_id, "status": status, "observed": _clip(observed)}


def _emit(stream, verdict: dict) -> None:
    stream.write(json.dumps(verdict) + "\n")
    stream.flush()


# =============================================================================
# Assertion style: worker child
# =============================================================================

def _load_solution(path: str):
    import importlib.util

    spec = importlib.util.spec_from_file_location("solution", path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def _failing_assert_lineno(err: BaseException):
    tb = err.__traceback__
    lineno = None
    while tb is not None:
        if tb.tb_frame.f_code.co_filename == "<case>":
            lineno = tb.tb_lineno
        tb = tb.tb_next
    return lineno


def _recover_observed(assertion: str, namespace: dict, err: BaseException) -> str:
    """For a failed comparison assert, re-evaluate the left-hand side and
    report its value; anything unrecoverable falls back to the assertion
    text itself."""
    try:
        tree = ast.parse(assertion)
        asserts = [node for node in ast.walk(tree) if isinstance(node, ast.Assert)]
        lineno = _failing_assert_lineno(err)
        node = next((a for a in asserts if a.lineno == lineno), None)
        if node is None and len(asserts) == 1:
            node = asserts[0]
        if node is not None and isinstance(node.test, ast.Compare) and len(node.test.comparators) == 1:
            expr = ast.Expression(node.test.left)
            ast.fix_missing_locations(expr)
            value = eval(compile(expr, "<case-lhs>", "eval"), namespace)
            return repr(value)
    except BaseException:
        pass
    return assertion


def run_worker(manifest: dict, start: int) -> int:
    """Execute assertion cases from `start` on, verdicts to the real stdout.

    File descriptor 1 is pointed at /dev/null before the solution loads, so
    neither print() nor a raw os.write(1, ...) from solution code can inject
    bytes into the verdict stream.
    """
    verdict_stream = os.fdopen(os.dup(1), "w", encoding="utf-8")
    devnull = os.open(os.devnull, os.O_WRONLY)
    os.dup2(devnull, 1)
    os.close(devnull)
    sys.stdout = io.StringIO()

    cases = manifest["cases"][start:]
    try:
        module = _load_solution(manifest["solution_path"])
    except BaseException as err:
        observed = f"{type(err).__name__}: {err}"
        for case in cases:
            _emit(verdict_stream, _verdict(case["id"], CRASH, observed))
        return 0

    for case in cases:
        namespace = dict(module.__dict__)
        sys.stdout = io.StringIO()
        try:
            exec(compile(case["assertion"], "<case>", "exec"), namespace)
        except AssertionError as err:
            observed = _recover_observed(case["assertion"], namespace, err)
            _emit(verdict_stream, _verdict(case["id"], WRONG_OUTPUT, observed))
        except KeyboardInterrupt:
            raise
        except BaseException as err:
            message = str(err) or type(err).__name__
            _emit(verdict_stream, _verdict(case["id"], RUNTIME_ERROR, f"{type(err).__name__}: {message}"))
        else:
            _emit(verdict_stream, _verdict(case["id"], PASS))
    return 0


# =============================================================================
# Assertion style: supervising parent
# =============================================================================

def _reader(pipe, lines: "queue.Queue") -> None:
    for line in pipe:
        lines.put(line)
    lines.put(None)


def _kill(proc: subprocess.Popen) -> None:
    try:
        proc.kill()
    except OSError:
        pass
    proc.wait()


def _stderr_tail(path: str, limit: int = 5) -> str:
    try:
        with open(path, encoding="utf-8", errors="replace") as fh:
            lines = fh.read().strip().splitlines()
        return "\n".join(lines[-limit:])
    except OSError:
        return ""


def run_assertion_cases(manifest: dict, manifest_path: str, out) -> int:
    cases = manifest["cases"]
    per_case = float(manifest.get("per_case_timeout", 10.0))
    index = 0

    while index < len(cases):
        with tempfile.NamedTemporaryFile(
            mode="w", suffix=".stderr", delete=False
        ) as err_file:
            err_path = err_file.name
        err_fh = open(err_path, "w")
        try:
            proc = subprocess.Popen(
                [sys.executable, os.path.abspath(__file__), manifest_path, "--worker", str(index)],
                stdout=subprocess.PIPE,
                stderr=err_fh,
                text=True,
            )
        finally:
            err_fh.close()
        lines: "queue.Queue" = queue.Queue()
        threading.Thread(target=_reader, args=(proc.stdout, lines), daemon=True).start()

        while index < len(cases):
            case = cases[index]
            try:
                line = lines.get(timeout=per_case + CASE_GRACE)
            except queue.Empty:
                _kill(proc)
                _emit(out, _verdict(case["id"], TIMEOUT))
                index += 1
                break
            if line is None:
                proc.wait()
                tail = _stderr_tail(err_path)
                _emit(out, _verdict(case["id"], CRASH, tail or f"worker exited with {proc.returncode}"))
                index += 1
                break
            try:
                verdict = json.loads(line)
                if verdict.get("id") != case["id"]:
                    raise ValueError(f"expected case {case['id']}, got {verdict.get('id')}")
            except (ValueError, AttributeError):
                _kill(proc)
                _emit(out, _verdict(case["id"], CRASH, f"unreadable worker output: {line.strip()!r}"))
                index += 1
                break
            _emit(out, verdict)
            index += 1

        # Whichever way the inner loop ended, the worker is finished with:
        # either it is already dead or every remaining case got a verdict.
        if proc.poll() is None:
            _kill(proc)
        os.unlink(err_path)
    return 0


# =============================================================================
# Stdin style: fresh interpreter per case
# =============================================================================

def _normalize(text: str):
    lines = [line.rstrip() for line in text.splitlines()]
    while lines and lines[-1] == "":
        lines.pop()
    return lines


def run_stdin_cases(manifest: dict, out) -> int:
    per_case = float(manifest.get("per_case_timeout", 10.0))
    solution = manifest["solution_path"]
    for case in manifest["cases"]:
        try:
            proc = subprocess.run(
                [sys.executable, solution],
                input=case.get("stdin", ""),
                capture_output=True,
                text=True,
                timeout=per_case,
            )
        except subprocess.TimeoutExpired:
            _emit(out, _verdict(case["id"], TIMEOUT))
            continue
        if proc.returncode < 0:
            name = signal.Signals(-proc.returncode).name
            tail = proc.stderr.strip().splitlines()[-3:]
            _emit(out, _verdict(case["id"], CRASH, "\n".join([f"killed by {name}", *tail]).strip()))
        elif proc.returncode > 0:
            tail = "\n".join(proc.stderr.strip().splitlines()[-5:])
            _emit(out, _verdict(case["id"], RUNTIME_ERROR, tail or f"exit code {proc.returncode}"))
        elif _normalize(proc.stdout) == _normalize(case.get("expected_stdout", "")):
            _emit(out, _verdict(case["id"], PASS))
        else:
            _emit(out, _verdict(case["id"], WRONG_OUTPUT, proc.stdout))
    return 0


# =============================================================================
# Entry point
# =============================================================================

def main(argv) -> int:
    if not argv or len(argv) not in (1, 3):
        print("usage: caseshim.py MANIFEST [--worker START]", file=sys.stderr)
        return 2
    manifest_path = argv[0]
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        print(f"cannot read manifest {manifest_path}: {err}", file=sys.stderr)
        return 2

    if len(argv) == 3:
        if argv[1] != "--worker":
            print(f"unknown option {argv[1]!r}", file=sys.stderr)
            return 2
        return run_worker(manifest, int(argv[2]))

    out = sys.stdout
    if manifest.get("io_style") == "stdin_stdout":
        return run_stdin_cases(manifest, out)
    return run_assertion_cases(manifest, manifest_path, out)


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))

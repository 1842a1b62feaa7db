import json
import subprocess
import sys
from pathlib import Path

SHIM = Path(__file__).parent.parent / "caseshim.py"


def run_shim(tmp_path, solution_source, cases, per_case_timeout=5.0, io_style="assertion"):
    """Write a solution and manifest, run the shim over them, and return
    (verdict dicts, exit code, stderr text)."""
    solution = tmp_path / "solution.py"
    solution.write_text(solution_source, "utf-8")
    manifest = {
        "solution_path": str(solution),
        "io_style": io_style,
        "cases": cases,
        "per_case_timeout": per_case_timeout,
    }
    manifest_path = tmp_path / "manifest.json"
    manifest_path.write_text(json.dumps(manifest), "utf-8")

    proc = subprocess.run(
        [sys.executable, str(SHIM), str(manifest_path)],
        capture_output=True,
        text=True,
        timeout=60,
    )
    verdicts = [json.loads(line) for line in proc.stdout.splitlines() if line.strip()]
    return verdicts, proc.returncode, proc.stderr


def assertion_cases(*assertions):
    return [{"id": i, "assertion": text} for i, text in enumerate(assertions)]

"""Adapters that map benchmark record files (JSON lines or a JSON array)
onto Problem objects.

Seven named formats share two shapes. The function-completion families
(humaneval, humaneval_et, evalplus, mbpp, mbpp_et) judge by assertions; the
contest families (apps, codecontest) judge by stdin/stdout pairs. Fields the
adapter does not consume ride along in Problem.extras so downstream reports
can break results down by, e.g., difficulty.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

from .models import HiddenTestSet, IoStyle, Problem, SampleCase

__all__ = [
    "DatasetDescriptor",
    "SchemaError",
    "DATASET_NAMES",
    "load_dataset",
    "load_records",
    "docstring_example_assertions",
]

DATASET_NAMES = (
    "humaneval",
    "humaneval_et",
    "evalplus",
    "mbpp",
    "mbpp_et",
    "apps",
    "codecontest",
)

_ASSERTION_NAMES = frozenset({"humaneval", "humaneval_et", "evalplus", "mbpp", "mbpp_et"})
_STDIN_NAMES = frozenset({"apps", "codecontest"})


class SchemaError(Exception):
    """A record does not fit its dataset's shape. Carries the record index."""

    def __init__(self, index: int, message: str):
        super().__init__(f"record {index}: {message}")
        self.index = index


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    path: Path

    def __post_init__(self) -> None:
        if self.name not in DATASET_NAMES:
            raise ValueError(f"unknown dataset name {self.name!r}; expected one of {DATASET_NAMES}")

    @property
    def io_style(self) -> IoStyle:
        return IoStyle.ASSERTION if self.name in _ASSERTION_NAMES else IoStyle.STDIN_STDOUT


# =============================================================================
# Record reading
# =============================================================================

def load_records(path: Union[str, Path]) -> list[dict]:
    """Accept one JSON object per line, or a single top-level JSON array."""
    text = Path(path).read_text("utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        data = json.loads(text)
        if not isinstance(data, list):
            raise SchemaError(0, "top-level JSON must be an array of objects")
        records = data
    else:
        records = []
        for line in text.splitlines():
            line = line.strip()
            if line:
                records.append(json.loads(line))
    for i, record in enumerate(records):
        if not isinstance(record, dict):
            raise SchemaError(i, "record is not a JSON object")
    return records


def _pick(record: Mapping[str, Any], names: Sequence[str]) -> tuple[Optional[str], Any]:
    for name in names:
        if name in record and record[name] is not None:
            return name, record[name]
    return None, None


def _require(record: Mapping[str, Any], index: int, names: Sequence[str]) -> tuple[str, Any]:
    key, value = _pick(record, names)
    if key is None:
        raise SchemaError(index, f"missing field {names[0]!r}")
    return key, value


# =============================================================================
# Docstring example mining
# =============================================================================

_INLINE_ARROW = re.compile(
    r"^\s*(?:>>>\s*)?(?P<call>[A-Za-z_]\w*\(.*\))\s*(?:==>|=>|➞)\s*(?P<expected>.+?)\s*$"
)
_REPL_CALL = re.compile(r"^\s*>>>\s*(?P<call>[A-Za-z_]\w*\(.*\))\s*$")


def docstring_example_assertions(text: str, entry_point: Optional[str] = None) -> list[str]:
    """Mine `f(args) => expected`, `f(args) ➞ expected`, and doctest-style
    `>>> f(args)` / next-line-result examples out of a problem statement,
    as assertion strings. When entry_point is given, calls to other names
    are ignored."""

    def accepted(call: str) -> bool:
        return entry_point is None or call.startswith(entry_point + "(")

    assertions: list[str] = []
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i]
        inline = _INLINE_ARROW.match(line)
        if inline and accepted(inline.group("call")):
            assertions.append(f"assert {inline.group('call')} == {inline.group('expected')}")
            i += 1
            continue
        repl = _REPL_CALL.match(line)
        if repl and accepted(repl.group("call")):
            if i + 1 < len(lines):
                expected = lines[i + 1].strip()
                if expected and not expected.startswith(">>>"):
                    assertions.append(f"assert {repl.group('call')} == {expected}")
                    i += 2
                    continue
        i += 1
    return assertions


# =============================================================================
# Per-family adapters
# =============================================================================

def _explicit_assertion_samples(value: Any, index: int) -> list[SampleCase]:
    if not isinstance(value, list):
        raise SchemaError(index, "sample_io must be a list")
    cases = []
    for item in value:
        if isinstance(item, str):
            cases.append(SampleCase(assertion=item))
        elif isinstance(item, dict) and "assertion" in item:
            cases.append(SampleCase(assertion=item["assertion"]))
        else:
            raise SchemaError(index, f"unusable sample_io entry: {item!r}")
    return cases


def _extras(record: Mapping[str, Any], consumed: set) -> dict:
    return {k: v for k, v in record.items() if k not in consumed}


def _adapt_humaneval(record: Mapping[str, Any], index: int) -> Problem:
    id_key, task_id = _require(record, index, ("task_id", "id", "name"))
    prompt_key, prompt = _require(record, index, ("prompt", "text", "description"))
    entry_key, entry_point = _require(record, index, ("entry_point",))
    test_key, test = _require(record, index, ("test",))

    consumed = {id_key, prompt_key, entry_key, test_key}
    sample_key, explicit = _pick(record, ("sample_io",))
    if sample_key is not None:
        consumed.add(sample_key)
        samples = _explicit_assertion_samples(explicit, index)
    else:
        samples = [SampleCase(assertion=a) for a in docstring_example_assertions(prompt, entry_point)]

    hidden = HiddenTestSet(
        io_style=IoStyle.ASSERTION,
        cases=(SampleCase(assertion=f"{test}\ncheck({entry_point})"),),
    )
    return Problem(
        id=str(task_id),
        description=prompt,
        sample_io=tuple(samples),
        hidden_tests=hidden,
        io_style=IoStyle.ASSERTION,
        extras=_extras(record, consumed),
    )


def _adapt_mbpp(record: Mapping[str, Any], index: int) -> Problem:
    id_key, task_id = _require(record, index, ("task_id", "id", "name"))
    text_key, text = _require(record, index, ("text", "prompt", "description"))
    test_key, test_list = _require(record, index, ("test_list", "test"))
    if isinstance(test_list, str):
        test_list = [test_list]
    if not isinstance(test_list, list) or not test_list:
        raise SchemaError(index, "test_list must be a non-empty list")

    consumed = {id_key, text_key, test_key}
    prefix_lines: list[str] = []
    imports_key, imports = _pick(record, ("test_imports",))
    if imports_key is not None:
        consumed.add(imports_key)
        prefix_lines.extend(imports)
    setup_key, setup = _pick(record, ("test_setup_code",))
    if setup_key is not None:
        consumed.add(setup_key)
        if setup.strip():
            prefix_lines.append(setup)

    def with_prefix(assertion: str) -> str:
        return "\n".join([*prefix_lines, assertion]) if prefix_lines else assertion

    hidden_cases = tuple(SampleCase(assertion=with_prefix(t)) for t in test_list)

    sample_key, explicit = _pick(record, ("sample_io",))
    if sample_key is not None:
        consumed.add(sample_key)
        samples = _explicit_assertion_samples(explicit, index)
    else:
        # Without curated samples the first listed test doubles as the
        # visible one; it stays in the hidden set as well.
        samples = [SampleCase(assertion=with_prefix(test_list[0]))]

    return Problem(
        id=str(task_id),
        description=text,
        sample_io=tuple(samples),
        hidden_tests=HiddenTestSet(io_style=IoStyle.ASSERTION, cases=hidden_cases),
        io_style=IoStyle.ASSERTION,
        extras=_extras(record, consumed),
    )


def _stdin_pairs(value: Any, index: int, what: str) -> list[SampleCase]:
    """Accept {"inputs": [...], "outputs": [...]}, a JSON string of that,
    or a list of {"input": ..., "output": ...} objects."""
    if isinstance(value, str):
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            raise SchemaError(index, f"{what} is a string but not valid JSON")
    if isinstance(value, dict):
        inputs = value.get("inputs")
        outputs = value.get("outputs")
        if not isinstance(inputs, list) or not isinstance(outputs, list):
            raise SchemaError(index, f"{what} must hold 'inputs' and 'outputs' lists")
        if len(inputs) != len(outputs):
            raise SchemaError(index, f"{what} inputs/outputs lengths differ")
        pairs = zip(inputs, outputs)
    elif isinstance(value, list):
        try:
            pairs = [(item["input"], item["output"]) for item in value]
        except (TypeError, KeyError):
            raise SchemaError(index, f"{what} entries must be input/output objects")
    else:
        raise SchemaError(index, f"{what} has an unusable shape: {type(value).__name__}")
    return [
        SampleCase(stdin=str(stdin), expected_stdout=str(expected))
        for stdin, expected in pairs
    ]


def _adapt_contest(record: Mapping[str, Any], index: int) -> Problem:
    id_key, task_id = _require(record, index, ("id", "task_id", "name", "problem_id"))
    desc_key, description = _require(record, index, ("description", "question", "prompt", "text"))
    test_key, tests = _require(record, index, ("input_output", "hidden_tests", "test"))

    consumed = {id_key, desc_key, test_key}
    hidden_cases = _stdin_pairs(tests, index, test_key)

    sample_key, explicit = _pick(record, ("sample_io", "sample_tests", "public_tests"))
    samples: list[SampleCase] = []
    if sample_key is not None:
        consumed.add(sample_key)
        samples = _stdin_pairs(explicit, index, sample_key)

    return Problem(
        id=str(task_id),
        description=description,
        sample_io=tuple(samples),
        hidden_tests=HiddenTestSet(io_style=IoStyle.STDIN_STDOUT, cases=tuple(hidden_cases)),
        io_style=IoStyle.STDIN_STDOUT,
        extras=_extras(record, consumed),
    )


_ADAPTERS = {
    "humaneval": _adapt_humaneval,
    "humaneval_et": _adapt_humaneval,
    "evalplus": _adapt_humaneval,
    "mbpp": _adapt_mbpp,
    "mbpp_et": _adapt_mbpp,
    "apps": _adapt_contest,
    "codecontest": _adapt_contest,
}


def load_dataset(desc: DatasetDescriptor) -> list[Problem]:
    """Read every record at desc.path through the family's adapter.

    Duplicate ids are rejected here so downstream resume logic can key
    result records by id alone.
    """
    adapter = _ADAPTERS[desc.name]
    problems: list[Problem] = []
    seen: set[str] = set()
    for index, record in enumerate(load_records(desc.path)):
        problem = adapter(record, index)
        if problem.id in seen:
            raise SchemaError(index, f"duplicate problem id {problem.id!r}")
        seen.add(problem.id)
        problems.append(problem)
    return problems

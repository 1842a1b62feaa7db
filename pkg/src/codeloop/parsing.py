"""Parsers for the structured markdown the agents send back.

Model formatting drifts constantly, so the heading matcher is deliberately
lenient: 2 to 4 leading '#', bold markers ignored, case-insensitive, trailing
colons ignored. Section content runs to the next heading of the same or a
shallower level.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .models import Plan, PlanVerdict, VerdictKind

log = logging.getLogger(__name__)

__all__ = [
    "MissingSection",
    "NoCodeBlock",
    "parse_plan",
    "parse_verdict",
    "extract_code",
    "parse_debug_response",
    "extract_section",
]


class MissingSection(Exception):
    """A required markdown section is absent from a response."""

    def __init__(self, section: str):
        self.section = section
        super().__init__(f"response has no usable {section!r} section")


class NoCodeBlock(Exception):
    """No fenced code block found in a response."""


_HEADING_RE = re.compile(r"^ {0,3}(#{2,4})\s*(.*?)\s*$")


@dataclass(frozen=True)
class _Heading:
    line_start: int       # offset of the heading line in the response
    content_start: int    # offset just past the heading line
    level: int
    title: str            # normalized: markdown stripped, lowercased, no colon


def _normalize_title(raw: str) -> str:
    return raw.replace("*", "").replace("_", "").replace("`", "").strip().rstrip(":").strip().lower()


def _scan_headings(text: str) -> list[_Heading]:
    headings = []
    offset = 0
    for line in text.splitlines(keepends=True):
        m = _HEADING_RE.match(line.rstrip("\n"))
        if m:
            headings.append(
                _Heading(
                    line_start=offset,
                    content_start=offset + len(line),
                    level=len(m.group(1)),
                    title=_normalize_title(m.group(2)),
                )
            )
        offset += len(line)
    return headings


def _section_text(text: str, headings: list[_Heading], index: int) -> str:
    head = headings[index]
    end = len(text)
    for later in headings[index + 1:]:
        if later.level <= head.level:
            end = later.line_start
            break
    return text[head.content_start:end].strip()


def _find(headings: list[_Heading], predicate, last: bool = False) -> int | None:
    hits = [i for i, h in enumerate(headings) if predicate(h.title)]
    if not hits:
        return None
    return hits[-1] if last else hits[0]


def extract_section(text: str, name: str, last: bool = False) -> str | None:
    """Text under the heading whose normalized title equals `name`."""
    headings = _scan_headings(text)
    idx = _find(headings, lambda t: t == name.lower(), last=last)
    if idx is None:
        return None
    return _section_text(text, headings, idx)


# =============================================================================
# Plan responses
# =============================================================================

def parse_plan(response: str) -> Plan:
    """Split a planning response into its four sections.

    Only the step list is mandatory; a response without a usable Plan
    section raises MissingSection("Plan"). The step text is taken from the
    final Plan heading, since earlier ones can appear inside the recalled
    example.
    """
    headings = _scan_headings(response)

    def grab(predicate, last: bool = False) -> str:
        idx = _find(headings, predicate, last=last)
        return _section_text(response, headings, idx) if idx is not None else ""

    plan_idx = _find(headings, lambda t: t == "plan", last=True)
    if plan_idx is None:
        raise MissingSection("Plan")
    steps = _section_text(response, headings, plan_idx)
    if not steps:
        raise MissingSection("Plan")

    return Plan(
        understanding=grab(lambda t: t == "problem understanding"),
        exemplar=grab(lambda t: t.startswith("recall")),
        algorithm=grab(lambda t: t.startswith("algorithm")),
        steps=steps,
        raw=response,
    )


# =============================================================================
# Verification responses
# =============================================================================

_NEGATIVE_PHRASE = "plan modification needed"
_POSITIVE_PHRASE = "no need to modify plan"


def parse_verdict(response: str) -> PlanVerdict:
    """Read the verdict phrase and the simulation narrative.

    The negative phrase dominates when both appear: a wasted refinement call
    is cheaper than spending a whole debug budget on a bad plan. A response
    with neither phrase counts as valid, with a warning, so garbage text
    cannot charge a refinement call.
    """
    cleaned = re.sub(r"\s+", " ", response.replace("*", "").replace("_", " ")).casefold()
    if _NEGATIVE_PHRASE in cleaned:
        kind = VerdictKind.NEEDS_MODIFICATION
    elif _POSITIVE_PHRASE in cleaned:
        kind = VerdictKind.VALID
    else:
        kind = VerdictKind.VALID
        log.warning("verification response carries no verdict phrase; treating plan as valid")

    headings = _scan_headings(response)
    idx = _find(headings, lambda t: t.startswith("simulation"))
    feedback = _section_text(response, headings, idx) if idx is not None else response
    if not feedback.strip():
        feedback = response
    return PlanVerdict(kind=kind, feedback=feedback)


# =============================================================================
# Code responses
# =============================================================================

_FENCE_RE = re.compile(r"^\s*```")


def _fenced_blocks(response: str) -> list[tuple[int, str]]:
    """(opening-fence offset, body) for each balanced fence pair, in order."""
    blocks = []
    open_offset: int | None = None
    body_parts: list[str] = []
    offset = 0
    for line in response.splitlines(keepends=True):
        if _FENCE_RE.match(line):
            if open_offset is None:
                open_offset = offset
                body_parts = []
            else:
                blocks.append((open_offset, "".join(body_parts)))
                open_offset = None
        elif open_offset is not None:
            body_parts.append(line)
        offset += len(line)
    return blocks


def extract_code(response: str) -> str:
    """Body of the LAST fenced block; the fence-line language tag (any
    casing) is dropped and the surrounding newline trimmed.

    Last-block rule: models often show illustrative snippets before the
    final solution.
    """
    blocks = _fenced_blocks(response)
    if not blocks:
        raise NoCodeBlock("response contains no fenced code block")
    return blocks[-1][1].strip("\n")


def parse_debug_response(response: str) -> tuple[str, str]:
    """(notes, code body) from a debugging response.

    Notes are everything before the Modified Code heading; when that heading
    is missing but a fence exists, everything before the last fence.
    """
    code = extract_code(response)
    headings = _scan_headings(response)
    idx = _find(headings, lambda t: t == "modified code")
    if idx is not None:
        notes = response[:headings[idx].line_start].strip()
    else:
        last_fence_offset = _fenced_blocks(response)[-1][0]
        notes = response[:last_fence_offset].strip()
    return notes, code

"""Structured-output wire format: canonical renderer and lenient parser.

The wire format is a fenced block of six labeled lines (Description, Intent,
Confidence, Valence, Arousal, Motion), reasoning prose allowed before the
block.  The parser prefers the fenced block and falls back to scanning
labeled lines anywhere in the transcript, because real model output drifts.
"""

from __future__ import annotations

import re

from ..affect import VAState
from .types import Intent, IntentCategory, IntentError, StructuredOutput

FIELD_ORDER = ("Description", "Intent", "Confidence", "Valence", "Arousal", "Motion")


class ParseError(IntentError):
    pass


class NoStructuredBlockError(ParseError):
    pass


class MissingFieldError(ParseError):
    def __init__(self, field_name: str):
        super().__init__(f"missing field {field_name}")
        self.field_name = field_name


class ValueOutOfRangeError(ParseError):
    def __init__(self, field_name: str, value: float):
        super().__init__(f"{field_name} = {value} outside its range")
        self.field_name = field_name
        self.value = value


def render_output(output: StructuredOutput, reasoning: str = "") -> str:
    """Canonical transcript: optional reasoning prose, then the fenced block."""
    lines = [
        f"Description: {output.description}",
        f"Intent: {output.intent.free_text}",
        f"Confidence: {output.confidence!r}",
        f"Valence: {output.va.valence!r}",
        f"Arousal: {output.va.arousal!r}",
        f"Motion: {output.primitive_token}",
    ]
    block = "```\n" + "\n".join(lines) + "\n```"
    return f"{reasoning.rstrip()}\n\n{block}\n" if reasoning else block + "\n"


_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
_LABELED = re.compile(
    r"^\s*(Description|Intent|Confidence|Valence|Arousal|Motion)\s*[:=]\s*(.*?)\s*$",
    re.IGNORECASE | re.MULTILINE,
)


def _scan_fields(text: str) -> dict:
    fields = {}
    for match in _LABELED.finditer(text):
        key = match.group(1).capitalize()
        if key not in fields:  # first occurrence wins
            fields[key] = match.group(2)
    return fields


def _require_number(fields: dict, name: str) -> float:
    raw = fields.get(name)
    if raw is None:
        raise MissingFieldError(name)
    try:
        return float(raw)
    except ValueError:
        # an unreadable number conveys nothing; treat as absent
        raise MissingFieldError(name) from None


def parse_output(raw: str) -> StructuredOutput:
    """Extract and validate the six structured fields from a transcript."""
    if not raw or not raw.strip():
        raise NoStructuredBlockError("empty transcript")

    fields = {}
    for block in _FENCE.findall(raw):
        candidate = _scan_fields(block)
        if candidate:
            fields = candidate
            break
    if not fields:
        fields = _scan_fields(raw)
    if not fields:
        raise NoStructuredBlockError("no structured block or labeled lines found")

    description = fields.get("Description")
    if not description:
        raise MissingFieldError("Description")
    intent_text = fields.get("Intent")
    if not intent_text:
        raise MissingFieldError("Intent")
    motion = fields.get("Motion")
    if not motion:
        raise MissingFieldError("Motion")

    confidence = _require_number(fields, "Confidence")
    valence = _require_number(fields, "Valence")
    arousal = _require_number(fields, "Arousal")
    if not 0.0 <= confidence <= 1.0:
        raise ValueOutOfRangeError("Confidence", confidence)
    if not -1.0 <= valence <= 1.0:
        raise ValueOutOfRangeError("Valence", valence)
    if not 0.0 <= arousal <= 1.0:
        raise ValueOutOfRangeError("Arousal", arousal)

    return StructuredOutput(
        description=description,
        intent=Intent(IntentCategory.match(intent_text), intent_text),
        confidence=confidence,
        va=VAState(valence, arousal),
        primitive_token=motion,
        raw=raw,
    )

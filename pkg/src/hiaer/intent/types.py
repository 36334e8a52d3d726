"""Value types for the intention-inference layer."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..affect import MotionPrimitive, StyleParams, VAState


class IntentError(Exception):
    pass


class EmptyInputError(IntentError):
    """Stripping a modality left neither frames nor an utterance."""


class EngineBusyError(IntentError):
    """An inference is already in flight on this engine instance."""


class IntentCategory(enum.Enum):
    AGGRESSION = "Aggression"
    CELEBRATION = "Celebration"
    CALM_GREETING = "CalmGreeting"
    DISAPPOINTMENT = "Disappointment"
    NEUTRAL = "Neutral"
    AMBIGUOUS = "Ambiguous"

    @classmethod
    def match(cls, text: str) -> "IntentCategory":
        """Case-insensitive match of free text onto the taxonomy; anything
        that names no category reads as Ambiguous."""
        head = (text or "").split(",")[0].strip().lower().replace(" ", "").replace("_", "")
        for cat in cls:
            if cat.value.lower() == head:
                return cat
        return cls.AMBIGUOUS


@dataclass(frozen=True)
class ImageFrame:
    data: bytes
    encoding: str  # e.g. "jpeg", "png"
    timestamp: float  # capture time, seconds

    def __post_init__(self):
        if not self.data:
            raise IntentError("image frame has no bytes")
        if not self.encoding:
            raise IntentError("image frame needs an encoding tag")


@dataclass(frozen=True)
class MultimodalInput:
    frames: tuple = ()
    utterance: str | None = None

    def __post_init__(self):
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        if not frames and not self.utterance:
            raise EmptyInputError("input needs frames or an utterance")
        stamps = [f.timestamp for f in frames]
        if stamps != sorted(stamps):
            raise IntentError("frames must be ordered by timestamp")

    def latest(self, count: int) -> "MultimodalInput":
        """The most recent `count` frames, utterance kept."""
        if count < 1 or len(self.frames) <= count:
            return self
        return MultimodalInput(self.frames[-count:], self.utterance)

    def summary(self) -> str:
        parts = []
        if self.frames:
            parts.append(f"{len(self.frames)} frame(s)")
        if self.utterance:
            parts.append(f'utterance "{self.utterance}"')
        return ", ".join(parts)


@dataclass(frozen=True)
class Intent:
    category: IntentCategory
    free_text: str

    def __post_init__(self):
        if not self.free_text:
            raise IntentError("intent free text must be nonempty")


@dataclass(frozen=True)
class StructuredOutput:
    description: str
    intent: Intent
    confidence: float
    va: VAState
    primitive_token: str
    raw: str = ""

    def __post_init__(self):
        if not self.description:
            raise IntentError("description must be nonempty")
        if not self.primitive_token:
            raise IntentError("primitive token must be nonempty")
        if not 0.0 <= self.confidence <= 1.0:
            raise IntentError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class FewShotExample:
    scene_text: str
    expected_output: StructuredOutput
    image_ref: str | None = None
    reasoning: str = ""

    def __post_init__(self):
        if not self.scene_text:
            raise IntentError("few-shot example needs scene text")


@dataclass(frozen=True)
class PrePrompt:
    persona_and_task: str
    output_spec_with_cot: str
    va_mapping_table: str
    safety_rules: str
    few_shot: tuple

    def __post_init__(self):
        for name in ("persona_and_task", "output_spec_with_cot", "va_mapping_table", "safety_rules"):
            if not getattr(self, name).strip():
                raise IntentError(f"pre-prompt section {name} is empty")
        few_shot = tuple(self.few_shot)
        object.__setattr__(self, "few_shot", few_shot)
        if not few_shot:
            raise IntentError("pre-prompt needs at least one few-shot example")


class HistoryBuffer:
    """Ring of the last K (input summary, StructuredOutput) exchanges."""

    def __init__(self, capacity: int = 6):
        if capacity < 1:
            raise IntentError("history capacity must be >= 1")
        self.capacity = capacity
        self._entries: list = []
        self.total_seen = 0

    def record(self, input_summary: str, output: StructuredOutput) -> None:
        self._entries.append((input_summary, output))
        if len(self._entries) > self.capacity:
            self._entries = self._entries[-self.capacity :]
        self.total_seen += 1

    def entries(self) -> list:
        return list(self._entries)

    def __len__(self) -> int:
        return len(self._entries)


@dataclass(frozen=True)
class FinalDecision:
    output: StructuredOutput
    primitive: MotionPrimitive
    style: StyleParams
    fell_back: bool


@dataclass(frozen=True)
class InferOutcome:
    """Result of one inference attempt: exactly one kind."""

    kind: str  # "ok" | "timeout" | "parse_error" | "transport_error"
    output: StructuredOutput | None = None
    error: str = ""
    latency_s: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ok", "timeout", "parse_error", "transport_error"):
            raise IntentError(f"unknown outcome kind {self.kind!r}")
        if (self.kind == "ok") != (self.output is not None):
            raise IntentError("output present iff kind == ok")

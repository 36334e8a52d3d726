"""The inference engine: one logical lane from multimodal input to a final
motion decision, with timeout, fallback, and transcript logging."""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from pathlib import Path

from ..affect import AffectConfig, UnknownPrimitiveError, VAState, Vocabulary, neutral_style
from ..clock import Clock, RealClock
from .clients import DeadlineExceededError, TransportError
from .parser import ParseError, parse_output
from .prompt import build_prompt, default_preprompt
from .types import (
    EmptyInputError,
    EngineBusyError,
    FinalDecision,
    HistoryBuffer,
    InferOutcome,
    Intent,
    IntentCategory,
    IntentError,
    MultimodalInput,
    PrePrompt,
    StructuredOutput,
)

MODALITY_MODES = ("prompt_only", "image_only", "combined")


@dataclass(frozen=True)
class IntentEngineConfig:
    frames_per_inference: int = 3
    timeout_s: float = 3.0
    history_capacity: int = 6

    def __post_init__(self):
        if self.frames_per_inference < 1 or self.timeout_s <= 0 or self.history_capacity < 1:
            raise IntentError("engine config values must be positive")


def select_modality(input: MultimodalInput, mode: str) -> MultimodalInput:
    """Project the input onto one modality; raises if nothing remains."""
    if mode not in MODALITY_MODES:
        raise IntentError(f"unknown modality mode {mode!r}")
    if mode == "combined":
        return input
    if mode == "prompt_only":
        if not input.utterance:
            raise EmptyInputError("prompt_only with no utterance")
        return MultimodalInput((), input.utterance)
    if not input.frames:
        raise EmptyInputError("image_only with no frames")
    return MultimodalInput(input.frames, None)


def fallback_output(reason: str, fallback_token: str) -> StructuredOutput:
    """Synthesized output standing in for a failed or absent inference."""
    return StructuredOutput(
        description=f"inference unavailable ({reason})",
        intent=Intent(IntentCategory.AMBIGUOUS, "Ambiguous"),
        confidence=0.0,
        va=VAState(0.0, 0.25),
        primitive_token=fallback_token,
        raw="",
    )


def decide(
    outcome: InferOutcome,
    cfg: AffectConfig,
    vocabulary: Vocabulary | None = None,
) -> FinalDecision:
    """Total mapping from any inference outcome to a safe, known primitive."""
    vocab = vocabulary if vocabulary is not None else Vocabulary.default()
    vocab.validate_config(cfg)

    if outcome.kind != "ok":
        primitive = vocab.select_fallback(0.0, None, cfg)
        return FinalDecision(
            output=fallback_output(outcome.kind, primitive.id),
            primitive=primitive,
            style=neutral_style(),
            fell_back=True,
        )

    output = outcome.output
    try:
        candidate = vocab.resolve(output.primitive_token)
    except UnknownPrimitiveError:
        candidate = None
    final = vocab.select_fallback(output.confidence, candidate, cfg)
    fell_back = candidate is None or final.id != candidate.id
    style = neutral_style() if fell_back else vocab.modulate_style(final, output.va)
    return FinalDecision(output=output, primitive=final, style=style, fell_back=fell_back)


class IntentEngine:
    """One inference lane: serialize infer() calls per instance.

    The busy guard raises rather than queues; independent engine instances
    may run concurrently.
    """

    def __init__(
        self,
        client,
        cfg: IntentEngineConfig | None = None,
        affect_cfg: AffectConfig | None = None,
        vocabulary: Vocabulary | None = None,
        preprompt: PrePrompt | None = None,
        clock: Clock | None = None,
        transcript_path=None,
    ):
        self.client = client
        self.cfg = cfg if cfg is not None else IntentEngineConfig()
        self.affect_cfg = affect_cfg if affect_cfg is not None else AffectConfig()
        self.vocabulary = vocabulary if vocabulary is not None else Vocabulary.default()
        self.vocabulary.validate_config(self.affect_cfg)
        self.preprompt = preprompt if preprompt is not None else default_preprompt()
        self.clock = clock if clock is not None else RealClock()
        self.history = HistoryBuffer(self.cfg.history_capacity)
        self.transcript: list = []
        self._transcript_path = Path(transcript_path) if transcript_path else None
        self._busy = threading.Lock()

    def infer(self, input: MultimodalInput, timeout_s: float | None = None) -> InferOutcome:
        if not self._busy.acquire(blocking=False):
            raise EngineBusyError("inference already in flight on this engine")
        try:
            return self._infer_locked(input, timeout_s)
        finally:
            self._busy.release()

    def _infer_locked(self, input: MultimodalInput, timeout_s: float | None) -> InferOutcome:
        deadline = timeout_s if timeout_s is not None else self.cfg.timeout_s
        sampled = input.latest(self.cfg.frames_per_inference)
        messages = build_prompt(self.preprompt, sampled, self.history)
        digest = hashlib.sha256(
            json.dumps(messages, sort_keys=True).encode("utf-8")
        ).hexdigest()
        t0 = self.clock.now()

        raw = None
        try:
            raw = self.client.send(messages, deadline)
        except DeadlineExceededError:
            outcome = InferOutcome(kind="timeout", latency_s=self.clock.now() - t0)
        except TransportError as exc:
            outcome = InferOutcome(
                kind="transport_error", error=str(exc), latency_s=self.clock.now() - t0
            )
        else:
            latency = self.clock.now() - t0
            try:
                output = parse_output(raw)
            except ParseError as exc:
                outcome = InferOutcome(kind="parse_error", error=str(exc), latency_s=latency)
            else:
                outcome = InferOutcome(kind="ok", output=output, latency_s=latency)
                self.history.record(sampled.summary(), output)

        self._log(t0, digest, raw, outcome.kind)
        return outcome

    def decide(self, outcome: InferOutcome) -> FinalDecision:
        return decide(outcome, self.affect_cfg, self.vocabulary)

    def _log(self, t: float, digest: str, raw, kind: str) -> None:
        record = {"t": t, "prompt_sha256": digest, "raw": raw or "", "outcome": kind}
        self.transcript.append(record)
        if self._transcript_path is not None:
            with open(self._transcript_path, "a") as fh:
                fh.write(json.dumps(record) + "\n")

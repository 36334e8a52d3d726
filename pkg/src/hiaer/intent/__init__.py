"""Intention inference: prompt construction, structured-output parsing,
inference transports, and the timeout/fallback decision layer."""

from .clients import (
    DEFAULT_TOKEN_ENV,
    ClientError,
    DeadlineExceededError,
    HttpInferenceClient,
    ScriptedInferenceClient,
    TransportError,
)
from .engine import (
    IntentEngine,
    IntentEngineConfig,
    decide,
    fallback_output,
    select_modality,
)
from .parser import (
    MissingFieldError,
    NoStructuredBlockError,
    ParseError,
    ValueOutOfRangeError,
    parse_output,
    render_output,
)
from .prompt import build_prompt, default_preprompt, load_preprompt_dir, system_text
from .types import (
    EmptyInputError,
    EngineBusyError,
    FewShotExample,
    FinalDecision,
    HistoryBuffer,
    ImageFrame,
    InferOutcome,
    Intent,
    IntentCategory,
    IntentError,
    MultimodalInput,
    PrePrompt,
    StructuredOutput,
)

__all__ = [
    "DEFAULT_TOKEN_ENV",
    "ClientError",
    "DeadlineExceededError",
    "EmptyInputError",
    "EngineBusyError",
    "FewShotExample",
    "FinalDecision",
    "HistoryBuffer",
    "HttpInferenceClient",
    "ImageFrame",
    "InferOutcome",
    "Intent",
    "IntentCategory",
    "IntentEngine",
    "IntentEngineConfig",
    "IntentError",
    "MissingFieldError",
    "MultimodalInput",
    "NoStructuredBlockError",
    "ParseError",
    "PrePrompt",
    "ScriptedInferenceClient",
    "StructuredOutput",
    "TransportError",
    "ValueOutOfRangeError",
    "build_prompt",
    "decide",
    "default_preprompt",
    "fallback_output",
    "load_preprompt_dir",
    "parse_output",
    "render_output",
    "select_modality",
    "system_text",
]

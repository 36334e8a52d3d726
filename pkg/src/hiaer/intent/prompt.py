"""Prompt assembly: pre-prompt sections, few-shot exchanges, history, and
the current multimodal input, rendered as a deterministic message sequence.

Messages are dicts {role, content} with content a list of parts; text parts
are {"type": "text", "text": ...}, image parts {"type": "image", "encoding",
"data_base64"}.  Transport clients adapt this to their wire schema.
"""

from __future__ import annotations

import base64
import json
from importlib import resources

from ..affect import VAState
from .parser import render_output
from .types import (
    FewShotExample,
    HistoryBuffer,
    Intent,
    IntentCategory,
    MultimodalInput,
    PrePrompt,
    StructuredOutput,
)

_DEFAULT_PREPROMPT = None


def _text(content: str) -> dict:
    return {"type": "text", "text": content}


def _image(frame) -> dict:
    return {
        "type": "image",
        "encoding": frame.encoding,
        "data_base64": base64.b64encode(frame.data).decode("ascii"),
    }


def load_preprompt_dir(root) -> PrePrompt:
    """Read the four prompt sections and few-shot examples from a directory
    (persona.txt, output_spec.txt, va_mapping.txt, safety_rules.txt,
    few_shot.json)."""

    def read(name: str) -> str:
        return (root / name).read_text()

    doc = json.loads(read("few_shot.json"))
    examples = []
    for ex in doc["examples"]:
        out = ex["output"]
        examples.append(
            FewShotExample(
                scene_text=ex["scene_text"],
                image_ref=ex.get("image_ref"),
                reasoning=ex.get("reasoning", ""),
                expected_output=StructuredOutput(
                    description=out["description"],
                    intent=Intent(IntentCategory.match(out["intent"]), out["intent"]),
                    confidence=out["confidence"],
                    va=VAState(out["valence"], out["arousal"]),
                    primitive_token=out["motion"],
                ),
            )
        )
    return PrePrompt(
        persona_and_task=read("persona.txt"),
        output_spec_with_cot=read("output_spec.txt"),
        va_mapping_table=read("va_mapping.txt"),
        safety_rules=read("safety_rules.txt"),
        few_shot=tuple(examples),
    )


def default_preprompt() -> PrePrompt:
    global _DEFAULT_PREPROMPT
    if _DEFAULT_PREPROMPT is None:
        _DEFAULT_PREPROMPT = load_preprompt_dir(resources.files("hiaer.data").joinpath("prompts"))
    return _DEFAULT_PREPROMPT


def system_text(pre: PrePrompt) -> str:
    return "\n\n".join(
        [
            pre.persona_and_task.strip(),
            pre.output_spec_with_cot.strip(),
            pre.va_mapping_table.strip(),
            pre.safety_rules.strip(),
        ]
    )


def build_prompt(pre: PrePrompt, input: MultimodalInput, history: HistoryBuffer) -> list:
    """1 system message, then few-shot exchanges, then history oldest-first,
    then the user turn carrying the frames and utterance."""
    messages = [{"role": "system", "content": [_text(system_text(pre))]}]
    for ex in pre.few_shot:
        messages.append({"role": "user", "content": [_text(ex.scene_text)]})
        messages.append(
            {
                "role": "assistant",
                "content": [_text(render_output(ex.expected_output, ex.reasoning))],
            }
        )
    for summary, output in history.entries():
        messages.append({"role": "user", "content": [_text(f"[earlier] {summary}")]})
        messages.append({"role": "assistant", "content": [_text(render_output(output))]})

    parts = []
    if input.utterance:
        parts.append(_text(f'The person says: "{input.utterance}"'))
    for frame in input.frames:
        parts.append(_text(f"Camera frame at t={frame.timestamp:.3f}s:"))
        parts.append(_image(frame))
    if not input.frames:
        parts.append(_text("(no camera frames for this request)"))
    messages.append({"role": "user", "content": parts})
    return messages

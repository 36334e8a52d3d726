"""Intent engine: inference outcomes, the fallback decision layer, the busy
guard, history, prompt modality selection, and the scripted client."""

import threading

import numpy as np
import pytest

from hiaer.affect import AffectConfig, Vocabulary, neutral_style
from hiaer.intent import (
    DeadlineExceededError,
    EmptyInputError,
    EngineBusyError,
    HistoryBuffer,
    ImageFrame,
    InferOutcome,
    IntentEngine,
    IntentEngineConfig,
    IntentError,
    MultimodalInput,
    ScriptedInferenceClient,
    TransportError,
    build_prompt,
    decide,
    default_preprompt,
    parse_output,
    select_modality,
)

from conftest import make_reply


def frame(t=0.0):
    return ImageFrame(data=b"\x89PNG fake", encoding="png", timestamp=t)


def text_input(text="Hello there"):
    return MultimodalInput(frames=(), utterance=text)


def combined_input(text="Hello there", n_frames=3):
    frames = tuple(frame(0.1 * i) for i in range(n_frames))
    return MultimodalInput(frames=frames, utterance=text)


class TestMultimodalInput:
    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            MultimodalInput(frames=(), utterance=None)
        with pytest.raises(EmptyInputError):
            MultimodalInput(frames=(), utterance="")

    def test_frames_must_be_ordered(self):
        with pytest.raises(IntentError):
            MultimodalInput(frames=(frame(1.0), frame(0.5)), utterance=None)

    def test_latest_keeps_tail(self):
        inp = combined_input(n_frames=5)
        sampled = inp.latest(2)
        assert len(sampled.frames) == 2
        assert sampled.frames == inp.frames[-2:]
        assert sampled.utterance == inp.utterance

    def test_latest_noop_when_small(self):
        inp = combined_input(n_frames=2)
        assert inp.latest(5) is inp


class TestSelectModality:
    def test_prompt_only_drops_frames(self):
        out = select_modality(combined_input(), "prompt_only")
        assert out.frames == ()
        assert out.utterance == "Hello there"

    def test_image_only_drops_text(self):
        out = select_modality(combined_input(), "image_only")
        assert out.utterance is None
        assert len(out.frames) == 3

    def test_combined_passthrough(self):
        inp = combined_input()
        assert select_modality(inp, "combined") is inp

    def test_empty_projection_rejected(self):
        with pytest.raises(EmptyInputError):
            select_modality(text_input(), "image_only")
        with pytest.raises(EmptyInputError):
            select_modality(
                MultimodalInput(frames=(frame(),), utterance=None), "prompt_only"
            )

    def test_unknown_mode_rejected(self):
        with pytest.raises(IntentError):
            select_modality(combined_input(), "telepathy")


class TestScriptedClient:
    def test_replies_in_order(self):
        client = ScriptedInferenceClient([(0.0, "one"), (0.0, "two")])
        assert client.send([], 1.0) == "one"
        assert client.send([], 1.0) == "two"

    def test_exhausted_raises_by_default(self):
        client = ScriptedInferenceClient([(0.0, "one")])
        client.send([], 1.0)
        with pytest.raises(TransportError):
            client.send([], 1.0)

    def test_exhausted_repeat_last(self):
        client = ScriptedInferenceClient([(0.0, "one")], exhausted="repeat_last")
        client.send([], 1.0)
        assert client.send([], 1.0) == "one"

    def test_delay_past_deadline(self):
        client = ScriptedInferenceClient([(5.0, "late")])
        with pytest.raises(DeadlineExceededError):
            client.send([], 0.01)

    def test_from_file(self, tmp_path):
        import json

        path = tmp_path / "script.json"
        path.write_text(json.dumps({"replies": [{"delay": 0.0, "reply": "hi"}]}))
        client = ScriptedInferenceClient.from_file(path)
        assert client.send([], 1.0) == "hi"


class TestEngineOutcomes:
    def engine(self, replies, **kw):
        return IntentEngine(ScriptedInferenceClient(replies), **kw)

    def test_ok_outcome(self):
        eng = self.engine([(0.0, make_reply())])
        outcome = eng.infer(text_input())
        assert outcome.kind == "ok"
        assert outcome.output.primitive_token == "wave_right_hand"
        assert len(eng.history) == 1

    def test_timeout_outcome(self):
        eng = self.engine([(10.0, make_reply())], cfg=IntentEngineConfig(timeout_s=0.01))
        outcome = eng.infer(text_input())
        assert outcome.kind == "timeout"
        assert len(eng.history) == 0  # failures never pollute history

    def test_parse_error_outcome(self):
        eng = self.engine([(0.0, "free prose, no structure")])
        outcome = eng.infer(text_input())
        assert outcome.kind == "parse_error"
        assert len(eng.history) == 0

    def test_transport_error_outcome(self):
        class Flaky:
            def send(self, messages, deadline_s):
                raise TransportError("connection reset")

        eng = IntentEngine(Flaky())
        outcome = eng.infer(text_input())
        assert outcome.kind == "transport_error"
        assert "connection reset" in outcome.error

    def test_transcript_records_every_attempt(self):
        eng = self.engine([(0.0, make_reply()), (0.0, "garbage")])
        eng.infer(text_input())
        eng.infer(text_input())
        assert [r["outcome"] for r in eng.transcript] == ["ok", "parse_error"]
        assert all(len(r["prompt_sha256"]) == 64 for r in eng.transcript)

    def test_busy_guard_rejects_concurrent_call(self):
        gate = threading.Event()

        class Slow:
            def send(self, messages, deadline_s):
                gate.wait(2.0)
                return make_reply()

        eng = IntentEngine(Slow())
        results = {}

        def first():
            results["first"] = eng.infer(text_input())

        t = threading.Thread(target=first)
        t.start()
        import time

        time.sleep(0.1)  # let the first call take the lock
        with pytest.raises(EngineBusyError):
            eng.infer(text_input())
        gate.set()
        t.join()
        assert results["first"].kind == "ok"


class TestDecide:
    def ok_outcome(self, **kw):
        return InferOutcome(kind="ok", output=parse_output(make_reply(**kw)), latency_s=0.1)

    def test_confident_known_token(self, vocab, affect_cfg):
        decision = decide(self.ok_outcome(), affect_cfg, vocab)
        assert decision.primitive.id == "wave_right_hand"
        assert not decision.fell_back
        # style follows the modulation law for the reported V-A
        assert decision.style.amplitude_scale == pytest.approx(0.8)
        assert decision.style.openness == pytest.approx(0.4)

    def test_alias_resolves_without_fallback(self, vocab, affect_cfg):
        decision = decide(self.ok_outcome(motion="wave"), affect_cfg, vocab)
        assert decision.primitive.id == "wave_right_hand"
        assert not decision.fell_back

    def test_low_confidence_falls_back(self, vocab, affect_cfg):
        decision = decide(self.ok_outcome(confidence=0.3), affect_cfg, vocab)
        assert decision.primitive.id == "stand_still"
        assert decision.fell_back
        assert decision.style == neutral_style()

    def test_threshold_boundary_does_not_fall_back(self, vocab, affect_cfg):
        decision = decide(self.ok_outcome(confidence=0.5), affect_cfg, vocab)
        assert not decision.fell_back

    def test_unknown_token_falls_back(self, vocab, affect_cfg):
        decision = decide(self.ok_outcome(motion="pirouette"), affect_cfg, vocab)
        assert decision.primitive.id == "stand_still"
        assert decision.fell_back

    def test_prohibited_token_replaced(self, vocab, affect_cfg):
        decision = decide(
            self.ok_outcome(motion="strike", confidence=0.99), affect_cfg, vocab
        )
        assert decision.primitive.id == "stand_still"
        assert decision.fell_back
        assert decision.style == neutral_style()

    @pytest.mark.parametrize("kind", ["timeout", "parse_error", "transport_error"])
    def test_failure_outcomes_fall_back_neutral(self, vocab, affect_cfg, kind):
        decision = decide(InferOutcome(kind=kind, error="x"), affect_cfg, vocab)
        assert decision.fell_back
        assert decision.primitive.id == "stand_still"
        assert decision.style == neutral_style()
        assert decision.output.intent.category.value == "Ambiguous"
        assert decision.output.confidence == 0.0


class TestFellBackSemantics:
    """fell_back marks a *replaced* choice: candidate resolves to the
    fallback primitive itself and a low confidence leaves the result
    unchanged, so no replacement is recorded."""

    def test_fallback_candidate_low_confidence_not_marked(self, vocab, affect_cfg):
        outcome = InferOutcome(
            kind="ok",
            output=parse_output(make_reply(motion="stand_still", confidence=0.1)),
            latency_s=0.1,
        )
        decision = decide(outcome, affect_cfg, vocab)
        assert decision.primitive.id == "stand_still"
        assert decision.fell_back is False

    def test_fallback_candidate_high_confidence_not_marked(self, vocab, affect_cfg):
        outcome = InferOutcome(
            kind="ok",
            output=parse_output(make_reply(motion="stand still", confidence=0.9)),
            latency_s=0.1,
        )
        decision = decide(outcome, affect_cfg, vocab)
        assert decision.fell_back is False


class TestHistory:
    def test_ring_capacity(self):
        buf = HistoryBuffer(capacity=3)
        out = parse_output(make_reply())
        for i in range(5):
            buf.record(f"turn {i}", out)
        assert len(buf) == 3
        assert buf.total_seen == 5
        assert [s for s, _ in buf.entries()] == ["turn 2", "turn 3", "turn 4"]

    def test_capacity_validated(self):
        with pytest.raises(IntentError):
            HistoryBuffer(capacity=0)

    def test_engine_history_feeds_prompt(self):
        eng = IntentEngine(ScriptedInferenceClient([(0.0, make_reply())] * 2))
        eng.infer(text_input("first utterance"))
        messages = build_prompt(default_preprompt(), text_input("second"), eng.history)
        joined = str(messages)
        assert "first utterance" in joined


class TestPrompt:
    def test_last_user_turn_carries_input(self):
        messages = build_prompt(default_preprompt(), combined_input("Good morning"), HistoryBuffer())
        last = messages[-1]
        assert last["role"] == "user"
        kinds = [p.get("type") for p in last["content"]]
        assert kinds.count("image") == 3
        texts = [p.get("text", "") for p in last["content"] if p.get("type") == "text"]
        assert any('The person says: "Good morning"' in t for t in texts)

    def test_system_turn_first(self):
        messages = build_prompt(default_preprompt(), text_input(), HistoryBuffer())
        assert messages[0]["role"] == "system"

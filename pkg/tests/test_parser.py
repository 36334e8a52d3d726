"""Structured-output wire format: extraction, validation, and the error
taxonomy under systematic mutation."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiaer.intent import (
    Intent,
    IntentCategory,
    MissingFieldError,
    NoStructuredBlockError,
    ParseError,
    StructuredOutput,
    ValueOutOfRangeError,
    parse_output,
    render_output,
)
from hiaer.affect import VAState

from conftest import make_reply

NUMERIC_FIELDS = ("Confidence", "Valence", "Arousal")
TEXT_FIELDS = ("Description", "Intent", "Motion")
ALL_FIELDS = TEXT_FIELDS[:2] + NUMERIC_FIELDS + TEXT_FIELDS[2:]


def test_fenced_block_parses():
    out = parse_output(make_reply())
    assert out.description == "A person waves in greeting."
    assert out.intent.category is IntentCategory.CALM_GREETING
    assert out.intent.free_text == "CalmGreeting, friendly hello"
    assert out.confidence == 0.9
    assert out.va.valence == 0.4
    assert out.va.arousal == 0.3
    assert out.primitive_token == "wave_right_hand"


def test_bare_labeled_lines_parse():
    out = parse_output(make_reply(fenced=False))
    assert out.primitive_token == "wave_right_hand"


def test_reasoning_prose_before_block_ignored():
    raw = "The subject seems pleased.\nLots of waving.\n\n" + make_reply()
    assert parse_output(raw).confidence == 0.9


def test_fence_with_language_tag():
    raw = make_reply().replace("```\n", "```text\n", 1)
    assert parse_output(raw).primitive_token == "wave_right_hand"


def test_first_occurrence_wins_on_duplicates():
    raw = make_reply() + "\nConfidence: 0.1"
    assert parse_output(raw).confidence == 0.9


def test_labels_case_insensitive():
    raw = make_reply().replace("Confidence:", "CONFIDENCE:").replace("Motion:", "motion:")
    out = parse_output(raw)
    assert out.confidence == 0.9
    assert out.primitive_token == "wave_right_hand"


def test_equals_separator_accepted():
    raw = make_reply().replace("Confidence: 0.9", "Confidence = 0.9")
    assert parse_output(raw).confidence == 0.9


def test_render_parse_round_trip():
    out = StructuredOutput(
        description="Someone cheers loudly.",
        intent=Intent(IntentCategory.CELEBRATION, "Celebration, big win"),
        confidence=0.73,
        va=VAState(0.62, 0.81),
        primitive_token="cheer",
    )
    again = parse_output(render_output(out, reasoning="They look thrilled."))
    assert again.description == out.description
    assert again.intent.free_text == out.intent.free_text
    assert again.intent.category is IntentCategory.CELEBRATION
    assert again.confidence == out.confidence
    assert again.va == out.va
    assert again.primitive_token == out.primitive_token


@pytest.mark.parametrize("raw", ["", "   \n\t ", "no fields at all", "```\njust prose\n```"])
def test_no_structured_block(raw):
    with pytest.raises(NoStructuredBlockError):
        parse_output(raw)


@pytest.mark.parametrize("field", ALL_FIELDS)
def test_each_dropped_field_is_missing(field):
    lines = [
        line
        for line in make_reply(fenced=False).splitlines()
        if not line.startswith(f"{field}:")
    ]
    with pytest.raises(MissingFieldError) as err:
        parse_output("```\n" + "\n".join(lines) + "\n```")
    assert field in str(err.value)


@pytest.mark.parametrize("field", NUMERIC_FIELDS)
def test_unreadable_number_is_missing(field):
    raw = make_reply(**{field.lower(): "definitely"})
    with pytest.raises(MissingFieldError) as err:
        parse_output(raw)
    assert field in str(err.value)


@pytest.mark.parametrize(
    "field,value",
    [
        ("confidence", -0.01),
        ("confidence", 1.01),
        ("confidence", 12),
        ("valence", -1.5),
        ("valence", 1.0001),
        ("arousal", -0.2),
        ("arousal", 2.0),
    ],
)
def test_out_of_range_values(field, value):
    with pytest.raises(ValueOutOfRangeError) as err:
        parse_output(make_reply(**{field: value}))
    assert field.capitalize() in str(err.value)


@pytest.mark.parametrize(
    "field,value", [("confidence", 0.0), ("confidence", 1.0), ("valence", -1.0), ("valence", 1.0), ("arousal", 0.0), ("arousal", 1.0)]
)
def test_boundary_values_accepted(field, value):
    out = parse_output(make_reply(**{field: value}))
    got = {
        "confidence": out.confidence,
        "valence": out.va.valence,
        "arousal": out.va.arousal,
    }[field]
    assert got == value


def test_unknown_intent_head_maps_to_ambiguous():
    out = parse_output(make_reply(intent="SomethingNovel, hard to say"))
    assert out.intent.category is IntentCategory.AMBIGUOUS


@pytest.mark.parametrize(
    "text,expected",
    [
        ("Aggression", IntentCategory.AGGRESSION),
        ("aggression, fists raised", IntentCategory.AGGRESSION),
        ("Calm Greeting, relaxed", IntentCategory.CALM_GREETING),
        ("calm_greeting", IntentCategory.CALM_GREETING),
        ("CELEBRATION", IntentCategory.CELEBRATION),
        ("Disappointment, slumped", IntentCategory.DISAPPOINTMENT),
        ("neutral", IntentCategory.NEUTRAL),
        ("Ambiguous", IntentCategory.AMBIGUOUS),
        ("", IntentCategory.AMBIGUOUS),
        ("gibberish words", IntentCategory.AMBIGUOUS),
    ],
)
def test_category_matching(text, expected):
    assert IntentCategory.match(text) is expected


class TestMutationFuzz:
    """Systematic single mutations each land on the designated error class."""

    def test_full_matrix(self):
        base = make_reply()
        cases = []
        for field in ALL_FIELDS:
            mutated = "\n".join(
                line
                for line in base.splitlines()
                if not line.lstrip().startswith(f"{field}:")
            )
            cases.append((mutated, MissingFieldError))
        for field, bad in (("Confidence", "5.0"), ("Valence", "-9"), ("Arousal", "1.2")):
            mutated = "\n".join(
                f"{field}: {bad}" if line.startswith(f"{field}:") else line
                for line in base.splitlines()
            )
            cases.append((mutated, ValueOutOfRangeError))
        cases.append((base.replace(":", " "), NoStructuredBlockError))
        cases.append(("The subject waves. No structure today.", NoStructuredBlockError))

        for mutated, expected in cases:
            with pytest.raises(expected):
                parse_output(mutated)

    @settings(max_examples=300, deadline=None)
    @given(st.text(max_size=400))
    def test_arbitrary_text_never_crashes(self, text):
        try:
            out = parse_output(text)
        except ParseError:
            return
        assert 0.0 <= out.confidence <= 1.0
        assert -1.0 <= out.va.valence <= 1.0
        assert 0.0 <= out.va.arousal <= 1.0
        assert math.isfinite(out.confidence)


@settings(max_examples=150, deadline=None)
@given(
    conf=st.floats(min_value=0, max_value=1, allow_nan=False),
    val=st.floats(min_value=-1, max_value=1, allow_nan=False),
    aro=st.floats(min_value=0, max_value=1, allow_nan=False),
)
def test_property_in_range_replies_parse_exactly(conf, val, aro):
    out = parse_output(make_reply(confidence=repr(conf), valence=repr(val), arousal=repr(aro)))
    assert out.confidence == conf
    assert out.va.valence == val
    assert out.va.arousal == aro

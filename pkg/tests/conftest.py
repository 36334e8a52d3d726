import sys

import numpy as np
import pytest

from hiaer.affect import AffectConfig, StyleParams, Vocabulary


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    verdicts = getattr(acceptance, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for line in verdicts:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def vocab():
    return Vocabulary.default()


@pytest.fixture(scope="session")
def affect_cfg():
    return AffectConfig()


@pytest.fixture
def nominal_style():
    return StyleParams(amplitude_scale=1.0, tempo_scale=1.0, openness=0.0)


def make_reply(
    description="A person waves in greeting.",
    intent="CalmGreeting, friendly hello",
    confidence=0.9,
    valence=0.4,
    arousal=0.3,
    motion="wave_right_hand",
    fenced=True,
):
    lines = (
        f"Description: {description}\n"
        f"Intent: {intent}\n"
        f"Confidence: {confidence}\n"
        f"Valence: {valence}\n"
        f"Arousal: {arousal}\n"
        f"Motion: {motion}"
    )
    if fenced:
        return f"```\n{lines}\n```"
    return lines

"""Affect model: quadrant classification, the style modulation law, the
vocabulary index, and the confidence-aware fallback gate."""

import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiaer.affect import (
    AffectConfig,
    AffectError,
    AffectQuadrant,
    ConfigurationError,
    MotionPrimitive,
    StyleParams,
    UnknownPrimitiveError,
    VAState,
    Vocabulary,
    classify_quadrant,
    modulate_style,
    neutral_style,
)

Q1 = AffectQuadrant.Q1_AGGRESSION_TENSION
Q2 = AffectQuadrant.Q2_WELCOMING
Q3 = AffectQuadrant.Q3_CALM_SUPPORT
Q4 = AffectQuadrant.Q4_DEFENSIVE_WITHDRAWAL
NEUTRAL = AffectQuadrant.NEUTRAL


class TestVAState:
    def test_bounds_enforced(self):
        with pytest.raises(AffectError):
            VAState(1.2, 0.5)
        with pytest.raises(AffectError):
            VAState(-1.2, 0.5)
        with pytest.raises(AffectError):
            VAState(0.0, -0.1)
        with pytest.raises(AffectError):
            VAState(0.0, 1.1)
        with pytest.raises(AffectError):
            VAState(float("nan"), 0.5)

    def test_boundaries_allowed(self):
        VAState(-1.0, 0.0)
        VAState(1.0, 1.0)


class TestClassification:
    @pytest.mark.parametrize(
        "v,a,expected",
        [
            (-0.6, 0.8, Q1),
            (0.6, 0.8, Q2),
            (0.6, 0.2, Q3),
            (-0.6, 0.2, Q4),
            (0.0, 0.9, NEUTRAL),  # inside the valence band regardless of arousal
            (0.1, 0.1, NEUTRAL),
            (-0.15, 0.9, NEUTRAL),  # band edge is neutral (<=)
            (0.15, 0.0, NEUTRAL),
            (0.16, 0.48, Q2),  # split boundary counts as high arousal
            (0.16, 0.4799, Q3),
            (-0.16, 0.48, Q1),
            (-0.16, 0.4799, Q4),
        ],
    )
    def test_regions(self, v, a, expected, affect_cfg):
        assert classify_quadrant(VAState(v, a), affect_cfg) is expected

    def test_custom_config_moves_boundaries(self):
        cfg = AffectConfig(arousal_split=0.7, neutral_valence_band=0.3)
        assert classify_quadrant(VAState(0.25, 0.9), cfg) is NEUTRAL
        assert classify_quadrant(VAState(0.4, 0.65), cfg) is Q3

    @settings(max_examples=300, deadline=None)
    @given(
        v=st.floats(min_value=-1, max_value=1, allow_nan=False),
        a=st.floats(min_value=0, max_value=1, allow_nan=False),
    )
    def test_total_and_consistent(self, v, a):
        cfg = AffectConfig()
        got = classify_quadrant(VAState(v, a), cfg)
        if abs(v) <= cfg.neutral_valence_band:
            assert got is NEUTRAL
        elif v > 0:
            assert got is (Q2 if a >= cfg.arousal_split else Q3)
        else:
            assert got is (Q1 if a >= cfg.arousal_split else Q4)


class TestStyleLaw:
    def test_linear_law(self):
        style = modulate_style(VAState(0.3, 0.8))
        assert style.amplitude_scale == pytest.approx(1.3)
        assert style.tempo_scale == pytest.approx(1.3)
        assert style.openness == pytest.approx(0.3)

    def test_neutral_style(self):
        style = neutral_style()
        assert style.amplitude_scale == pytest.approx(0.75)
        assert style.tempo_scale == pytest.approx(0.75)
        assert style.openness == 0.0

    @settings(max_examples=200, deadline=None)
    @given(
        v=st.floats(min_value=-1, max_value=1, allow_nan=False),
        a=st.floats(min_value=0, max_value=1, allow_nan=False),
    )
    def test_property_range_and_monotonicity(self, v, a):
        style = modulate_style(VAState(v, a))
        assert 0.5 <= style.amplitude_scale <= 1.5
        assert style.amplitude_scale == style.tempo_scale
        assert style.openness == v

    def test_style_params_validated(self):
        # scales need only be positive (operator overrides may exceed the
        # modulation law's natural range); openness stays in [-1, 1]
        StyleParams(amplitude_scale=0.4, tempo_scale=1.6, openness=0.0)
        with pytest.raises(AffectError):
            StyleParams(amplitude_scale=0.0, tempo_scale=1.0, openness=0.0)
        with pytest.raises(AffectError):
            StyleParams(amplitude_scale=1.0, tempo_scale=-0.1, openness=0.0)
        with pytest.raises(AffectError):
            StyleParams(amplitude_scale=1.0, tempo_scale=1.0, openness=-1.5)
        with pytest.raises(AffectError):
            StyleParams(amplitude_scale=float("nan"), tempo_scale=1.0, openness=0.0)


class TestVocabulary:
    def test_bundled_size_and_entries(self, vocab):
        assert len(vocab) == 11
        ids = {p.id for p in vocab}
        assert {
            "wave_right_hand",
            "handshake",
            "point",
            "cheer",
            "hands_on_hips",
            "cross_arms",
            "two_arm_celebration",
            "guard_stance",
            "beat_gesture",
            "stand_still",
            "strike",
        } == ids

    def test_exactly_one_prohibited(self, vocab):
        prohibited = [p.id for p in vocab if p.safety_class == "prohibited"]
        assert prohibited == ["strike"]

    @pytest.mark.parametrize(
        "token,expected",
        [
            ("wave_right_hand", "wave_right_hand"),
            ("wave", "wave_right_hand"),
            ("Waving", "wave_right_hand"),
            ("wave hand", "wave_right_hand"),
            ("  WAVE-RIGHT-HAND ", "wave_right_hand"),
            ("punch", "guard_stance"),
            ("punch stance", "guard_stance"),
            ("defensive guard", "guard_stance"),
            ("stand still", "stand_still"),
            ("excited cheer", "cheer"),
        ],
    )
    def test_resolution_and_aliases(self, vocab, token, expected):
        assert vocab.resolve(token).id == expected

    def test_unknown_token_raises(self, vocab):
        with pytest.raises(UnknownPrimitiveError):
            vocab.resolve("moonwalk")
        with pytest.raises(UnknownPrimitiveError):
            vocab.resolve("")

    def test_get_unknown_id(self, vocab):
        with pytest.raises(UnknownPrimitiveError):
            vocab.get("nope")

    def test_duplicate_ids_rejected(self):
        prim = MotionPrimitive(id="x", display_text="x")
        with pytest.raises(ConfigurationError):
            Vocabulary([prim, prim])

    def test_quadrant_affinity_present(self, vocab):
        assert Q2 in vocab.get("cheer").quadrant_affinity
        assert Q1 in vocab.get("guard_stance").quadrant_affinity
        assert NEUTRAL in vocab.get("stand_still").quadrant_affinity


class TestFallbackGate:
    def test_confident_known_safe_passes_through(self, vocab, affect_cfg):
        wave = vocab.get("wave_right_hand")
        assert vocab.select_fallback(0.9, wave, affect_cfg) is wave

    def test_threshold_boundary_passes(self, vocab, affect_cfg):
        wave = vocab.get("wave_right_hand")
        assert vocab.select_fallback(affect_cfg.confidence_threshold, wave, affect_cfg) is wave

    def test_below_threshold_falls_back(self, vocab, affect_cfg):
        wave = vocab.get("wave_right_hand")
        got = vocab.select_fallback(affect_cfg.confidence_threshold - 1e-9, wave, affect_cfg)
        assert got.id == affect_cfg.fallback_primitive_id

    def test_missing_candidate_falls_back(self, vocab, affect_cfg):
        assert vocab.select_fallback(0.99, None, affect_cfg).id == "stand_still"

    def test_prohibited_candidate_blocked(self, vocab, affect_cfg):
        strike = vocab.get("strike")
        assert vocab.select_fallback(1.0, strike, affect_cfg).id == "stand_still"

    def test_never_returns_prohibited(self, vocab, affect_cfg):
        for prim in vocab:
            for conf in (0.0, 0.49, 0.5, 1.0):
                got = vocab.select_fallback(conf, prim, affect_cfg)
                assert got.safety_class != "prohibited"

    def test_fallback_must_exist(self, vocab):
        cfg = dataclasses.replace(AffectConfig(), fallback_primitive_id="missing")
        with pytest.raises(ConfigurationError):
            vocab.validate_config(cfg)

    def test_fallback_must_be_safe(self, vocab):
        cfg = dataclasses.replace(AffectConfig(), fallback_primitive_id="strike")
        with pytest.raises(ConfigurationError):
            vocab.validate_config(cfg)


class TestAffectConfig:
    def test_defaults(self, affect_cfg):
        assert affect_cfg.arousal_split == 0.48
        assert affect_cfg.neutral_valence_band == 0.15
        assert affect_cfg.confidence_threshold == 0.5
        assert affect_cfg.fallback_primitive_id == "stand_still"

    def test_invalid_values_rejected(self):
        with pytest.raises(AffectError):
            AffectConfig(arousal_split=-0.1)
        with pytest.raises(AffectError):
            AffectConfig(arousal_split=1.1)
        with pytest.raises(AffectError):
            AffectConfig(neutral_valence_band=-0.01)
        with pytest.raises(AffectError):
            AffectConfig(confidence_threshold=1.5)

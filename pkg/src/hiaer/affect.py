"""Valence-Arousal affect model, quadrant classification, and the gesture vocabulary.

Valence lives on [-1, +1] (displeasure to pleasure), arousal on [0, 1]
(deactivation to activation).  Quadrants pair an affect region with a
characteristic gesture family; a configurable neutral band around zero
valence absorbs weak signals.  The vocabulary maps free-text motion tokens
to canonical primitives and carries the safety classing that the fallback
policy enforces.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

__all__ = [
    "AffectError",
    "UnknownPrimitiveError",
    "ConfigurationError",
    "VAState",
    "AffectQuadrant",
    "MotionPrimitive",
    "StyleParams",
    "AffectConfig",
    "Vocabulary",
    "classify_quadrant",
    "modulate_style",
    "neutral_style",
]


class AffectError(Exception):
    pass


class UnknownPrimitiveError(AffectError):
    """Token does not resolve to any vocabulary entry."""


class ConfigurationError(AffectError):
    """Invalid affect configuration (e.g. fallback primitive missing)."""


@dataclass(frozen=True)
class VAState:
    """A point in affect space: valence in [-1, 1], arousal in [0, 1]."""

    valence: float
    arousal: float

    def __post_init__(self):
        v, a = float(self.valence), float(self.arousal)
        if not (-1.0 <= v <= 1.0):
            raise AffectError(f"valence {v} outside [-1, 1]")
        if not (0.0 <= a <= 1.0):
            raise AffectError(f"arousal {a} outside [0, 1]")
        object.__setattr__(self, "valence", v)
        object.__setattr__(self, "arousal", a)

    @classmethod
    def create(cls, valence: float, arousal: float, mode: str = "reject") -> "VAState":
        """Build a state, either rejecting or clamping out-of-range values."""
        if mode == "clamp":
            valence = min(1.0, max(-1.0, float(valence)))
            arousal = min(1.0, max(0.0, float(arousal)))
        elif mode != "reject":
            raise ConfigurationError(f"unknown VA construction mode {mode!r}")
        return cls(valence, arousal)


class AffectQuadrant(enum.Enum):
    Q1_AGGRESSION_TENSION = "Q1"
    Q2_WELCOMING = "Q2"
    Q3_CALM_SUPPORT = "Q3"
    Q4_DEFENSIVE_WITHDRAWAL = "Q4"
    NEUTRAL = "Neutral"


SAFETY_CLASSES = ("safe", "defensive", "prohibited")


@dataclass(frozen=True)
class MotionPrimitive:
    """A gesture command: canonical id, planner-facing text, affect affinity."""

    id: str
    display_text: str
    quadrant_affinity: frozenset = frozenset()
    safety_class: str = "safe"
    aliases: tuple = ()

    def __post_init__(self):
        if not self.id or self.id != _canonical_token(self.id):
            raise AffectError(f"primitive id {self.id!r} is not canonical snake form")
        if not self.display_text:
            raise AffectError(f"primitive {self.id} has empty display text")
        if self.safety_class not in SAFETY_CLASSES:
            raise AffectError(f"bad safety class {self.safety_class!r} on {self.id}")
        object.__setattr__(self, "quadrant_affinity", frozenset(self.quadrant_affinity))
        object.__setattr__(self, "aliases", tuple(self.aliases))


@dataclass(frozen=True)
class StyleParams:
    """Expressive style: motion amplitude/tempo multipliers plus openness."""

    amplitude_scale: float
    tempo_scale: float
    openness: float

    def __post_init__(self):
        for name in ("amplitude_scale", "tempo_scale", "openness"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise AffectError(f"{name} must be finite")
            object.__setattr__(self, name, val)
        if self.amplitude_scale <= 0 or self.tempo_scale <= 0:
            raise AffectError("amplitude and tempo scales must be positive")
        if not (-1.0 <= self.openness <= 1.0):
            raise AffectError("openness outside [-1, 1]")


@dataclass(frozen=True)
class AffectConfig:
    """Quadrant boundaries and the fallback policy knobs.

    Defaults are calibrated so the six bundled interaction scenarios land in
    their designated quadrants; both thresholds stay configurable because
    reported arousal averages straddle any single round split.
    """

    arousal_split: float = 0.48
    neutral_valence_band: float = 0.15
    confidence_threshold: float = 0.5
    fallback_primitive_id: str = "stand_still"
    va_mode: str = "reject"  # VAState construction: "reject" or "clamp"

    def __post_init__(self):
        if not (0.0 < self.arousal_split < 1.0):
            raise ConfigurationError("arousal_split must be in (0, 1)")
        if self.neutral_valence_band < 0.0:
            raise ConfigurationError("neutral_valence_band must be >= 0")
        if not (0.0 <= self.confidence_threshold <= 1.0):
            raise ConfigurationError("confidence_threshold must be in [0, 1]")


def classify_quadrant(va: VAState, cfg: AffectConfig = AffectConfig()) -> AffectQuadrant:
    """Deterministic, total quadrant classification of a valid V-A state.

    Neutral when |valence| is inside the neutral band; otherwise the sign of
    valence picks the left/right pair and the arousal split the upper/lower.
    """
    if abs(va.valence) <= cfg.neutral_valence_band:
        return AffectQuadrant.NEUTRAL
    high = va.arousal >= cfg.arousal_split
    if va.valence < 0:
        return AffectQuadrant.Q1_AGGRESSION_TENSION if high else AffectQuadrant.Q4_DEFENSIVE_WITHDRAWAL
    return AffectQuadrant.Q2_WELCOMING if high else AffectQuadrant.Q3_CALM_SUPPORT


def modulate_style(va: VAState) -> StyleParams:
    """Linear modulation law: scales = 0.5 + arousal, openness = valence."""
    return StyleParams(
        amplitude_scale=0.5 + va.arousal,
        tempo_scale=0.5 + va.arousal,
        openness=va.valence,
    )


def neutral_style() -> StyleParams:
    """Style of the fallback posture (V=0, A=0.25)."""
    return modulate_style(VAState(0.0, 0.25))


def _canonical_token(text: str) -> str:
    return "_".join(text.strip().lower().replace("-", " ").replace("_", " ").split())


class Vocabulary:
    """The fixed-at-startup motion primitive vocabulary.

    Lookup is case/whitespace-insensitive over ids, display texts, and
    aliases.  Selection-type operations never return a prohibited entry.
    """

    def __init__(self, primitives):
        self._by_id: dict[str, MotionPrimitive] = {}
        self._index: dict[str, MotionPrimitive] = {}
        for prim in primitives:
            if prim.id in self._by_id:
                raise ConfigurationError(f"duplicate primitive id {prim.id}")
            self._by_id[prim.id] = prim
            for key in (prim.id, prim.display_text, *prim.aliases):
                self._index.setdefault(_canonical_token(key), prim)

    @classmethod
    def from_file(cls, path) -> "Vocabulary":
        doc = json.loads(Path(path).read_text())
        return cls._from_doc(doc)

    @classmethod
    def default(cls) -> "Vocabulary":
        text = resources.files("hiaer.data").joinpath("vocabulary.json").read_text()
        return cls._from_doc(json.loads(text))

    @classmethod
    def _from_doc(cls, doc) -> "Vocabulary":
        prims = []
        for entry in doc["primitives"]:
            prims.append(
                MotionPrimitive(
                    id=entry["id"],
                    display_text=entry["display_text"],
                    quadrant_affinity=frozenset(
                        AffectQuadrant(q) for q in entry.get("quadrant_affinity", [])
                    ),
                    safety_class=entry.get("safety_class", "safe"),
                    aliases=tuple(entry.get("aliases", [])),
                )
            )
        return cls(prims)

    def __contains__(self, prim) -> bool:
        pid = prim.id if isinstance(prim, MotionPrimitive) else str(prim)
        return pid in self._by_id

    def __iter__(self):
        return iter(self._by_id.values())

    def __len__(self) -> int:
        return len(self._by_id)

    def get(self, primitive_id: str) -> MotionPrimitive:
        try:
            return self._by_id[primitive_id]
        except KeyError:
            raise UnknownPrimitiveError(f"no primitive with id {primitive_id!r}") from None

    def resolve(self, token: str) -> MotionPrimitive:
        """Normalize free text from the inference layer to a canonical primitive."""
        prim = self._index.get(_canonical_token(token or ""))
        if prim is None:
            raise UnknownPrimitiveError(f"unknown motion token {token!r}")
        return prim

    def modulate_style(self, primitive: MotionPrimitive, va: VAState) -> StyleParams:
        """Style for a vocabulary primitive; unknown primitives are an error."""
        if primitive.id not in self._by_id:
            raise UnknownPrimitiveError(f"primitive {primitive.id!r} not in vocabulary")
        return modulate_style(va)

    def validate_config(self, cfg: AffectConfig) -> None:
        """Fail fast at startup when the fallback primitive is not available."""
        if cfg.fallback_primitive_id not in self._by_id:
            raise ConfigurationError(
                f"fallback primitive {cfg.fallback_primitive_id!r} missing from vocabulary"
            )
        if self._by_id[cfg.fallback_primitive_id].safety_class == "prohibited":
            raise ConfigurationError("fallback primitive must not be prohibited")

    def select_fallback(
        self,
        intent_confidence: float,
        candidate: MotionPrimitive | None,
        cfg: AffectConfig,
    ) -> MotionPrimitive:
        """Confidence-aware safety gate.

        Returns the configured fallback when confidence is below threshold,
        the candidate is absent, or the candidate is prohibited; boundary
        confidence passes through.  Never returns a prohibited primitive.
        """
        self.validate_config(cfg)
        if (
            candidate is None
            or intent_confidence < cfg.confidence_threshold
            or candidate.safety_class == "prohibited"
        ):
            return self._by_id[cfg.fallback_primitive_id]
        return candidate

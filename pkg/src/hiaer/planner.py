"""Windowed autoregressive motion synthesis at 12.5 FPS.

Each step emits one window of frames conditioned on the active primitive,
its style, and the tail of the motion emitted so far; the next window seeds
from the previous output, so primitive switches inherit continuity from the
seeding mechanism alone.  Two interchangeable backends: a deterministic
procedural synthesizer and an HTTP client for an external text-to-motion
service speaking the same contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .affect import (
    MotionPrimitive,
    StyleParams,
    UnknownPrimitiveError,
    Vocabulary,
    neutral_style,
)
from .motion import (
    DEFAULT_FPS,
    FRAME_DIM,
    MotionClip,
    axis_angle_matrix,
    decode_frame,
    encode_frame,
    matrix_to_sixd,
    seed_window,
    stand_clip,
    stand_pose,
)

HISTORY_CAPACITY = 64


class PlannerError(Exception):
    pass


class BackendContractError(PlannerError):
    """Backend returned the wrong number of frames or a malformed array."""


class NotInitializedError(PlannerError):
    pass


@dataclass(frozen=True)
class PlannerConfig:
    fps: float = DEFAULT_FPS
    window_n: int = 8
    init_frames: int = 4
    seam_epsilon: float = 0.1
    backend: str = "procedural"

    def __post_init__(self):
        if self.window_n < 1 or self.init_frames < 1:
            raise PlannerError("window_n and init_frames must be >= 1")
        if self.seam_epsilon <= 0 or self.fps <= 0:
            raise PlannerError("seam_epsilon and fps must be positive")
        if self.backend not in ("procedural", "remote"):
            raise PlannerError(f"unknown backend {self.backend!r}")


@dataclass
class PlannerState:
    """Single-owner planner state; step/switch must be externally serialized."""

    history: MotionClip
    active_primitive: MotionPrimitive
    active_style: StyleParams
    window_index: int = 0
    command_stamp: int = 0
    switch_count: int = 0
    flagged_windows: list = field(default_factory=list)

    def seed(self, n: int) -> MotionClip:
        # The first step after a short init history (init_frames < window_n)
        # seeds with everything available; afterwards the tail always covers n.
        return seed_window(self.history, min(n, len(self.history)))


def initialize(cfg: PlannerConfig, vocabulary: Vocabulary | None = None) -> PlannerState:
    """Fresh state: init_frames stand frames, stand_still command, neutral style."""
    vocab = vocabulary if vocabulary is not None else Vocabulary.default()
    return PlannerState(
        history=stand_clip(cfg.init_frames, fps=cfg.fps),
        active_primitive=vocab.get("stand_still"),
        active_style=neutral_style(),
    )


def switch_primitive(state: PlannerState, decision) -> PlannerState:
    """Replace the active command; history untouched so the next window
    seeds from the old motion.  `decision` carries .primitive and .style."""
    changed = decision.primitive.id != state.active_primitive.id
    return replace(
        state,
        active_primitive=decision.primitive,
        active_style=decision.style,
        command_stamp=state.command_stamp + 1,
        switch_count=state.switch_count + (1 if changed else 0),
    )


def step(state: PlannerState, backend, cfg: PlannerConfig) -> np.ndarray:
    """Generate and commit the next window; returns it as (window_n, 135).

    The backend call happens before any state mutation, so a backend failure
    leaves the state untouched.
    """
    seed = state.seed(cfg.window_n)
    frames = backend.generate(
        state.active_primitive.display_text,
        state.active_style,
        seed,
        cfg.window_n,
        rng_seed=0,
    )
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape != (cfg.window_n, FRAME_DIM):
        raise BackendContractError(
            f"backend returned {frames.shape}, expected ({cfg.window_n}, {FRAME_DIM})"
        )
    if not np.all(np.isfinite(frames)):
        raise BackendContractError("backend returned non-finite frames")
    if getattr(backend, "last_generate_fell_back", False):
        state.flagged_windows.append(state.window_index)
    new_history = state.history.append(frames)
    if len(new_history) > HISTORY_CAPACITY:
        new_history = MotionClip(
            new_history.frames[-HISTORY_CAPACITY:], fps=new_history.fps, label=new_history.label
        )
    state.history = new_history
    state.window_index += 1
    return frames


# ---------------------------------------------------------------------------
# Procedural backend


@dataclass(frozen=True)
class CurveEntry:
    """One joint-angle curve: ramp-and-hold posture plus optional sinusoid.

    axis is 'y' (pitch), 'x' (roll), or 'z' (yaw); per joint the axes
    compose in fixed y-x-z order.
    """

    joint: int
    axis: str
    hold: float = 0.0
    ramp: float = 0.8
    osc_amp: float = 0.0
    osc_freq: float = 0.0


L_SHOULDER, R_SHOULDER = 16, 17
L_ELBOW, R_ELBOW = 18, 19
L_WRIST, R_WRIST = 20, 21
SPINE2 = 6

# Angle budgets leave headroom for amplitude scales up to ~1.6 inside the
# robot's joint limits after retargeting (elbow cap 2.0 is the tightest).
PRIMITIVE_CURVES = {
    "stand_still": (),
    "wave_right_hand": (
        CurveEntry(R_SHOULDER, "y", hold=-1.0),
        CurveEntry(R_SHOULDER, "x", hold=-0.25),
        CurveEntry(R_ELBOW, "y", hold=1.1),
        CurveEntry(R_WRIST, "z", osc_amp=0.4, osc_freq=0.5),
    ),
    "handshake": (
        CurveEntry(R_SHOULDER, "y", hold=-0.55, ramp=0.7),
        CurveEntry(R_ELBOW, "y", hold=0.9, ramp=0.7),
        CurveEntry(R_WRIST, "y", osc_amp=0.25, osc_freq=1.0),
    ),
    "point": (
        CurveEntry(R_SHOULDER, "y", hold=-1.1, ramp=0.9),
        CurveEntry(R_SHOULDER, "z", hold=0.15, ramp=0.9),
        CurveEntry(R_ELBOW, "y", hold=0.15, ramp=0.9),
    ),
    "cheer": (
        CurveEntry(L_SHOULDER, "y", hold=-1.6, ramp=0.9, osc_amp=0.12, osc_freq=1.0),
        CurveEntry(R_SHOULDER, "y", hold=-1.6, ramp=0.9, osc_amp=0.12, osc_freq=1.0),
        CurveEntry(L_SHOULDER, "x", hold=0.25, ramp=0.9),
        CurveEntry(R_SHOULDER, "x", hold=-0.25, ramp=0.9),
        CurveEntry(L_ELBOW, "y", hold=0.3, ramp=0.9),
        CurveEntry(R_ELBOW, "y", hold=0.3, ramp=0.9),
    ),
    "two_arm_celebration": (
        CurveEntry(L_SHOULDER, "y", hold=-1.3),
        CurveEntry(R_SHOULDER, "y", hold=-1.3),
        CurveEntry(L_SHOULDER, "x", hold=0.7),
        CurveEntry(R_SHOULDER, "x", hold=-0.7),
        CurveEntry(L_ELBOW, "y", hold=0.6),
        CurveEntry(R_ELBOW, "y", hold=0.6),
        CurveEntry(L_WRIST, "x", osc_amp=0.25, osc_freq=0.9),
        CurveEntry(R_WRIST, "x", osc_amp=0.25, osc_freq=0.9),
    ),
    "hands_on_hips": (
        CurveEntry(L_SHOULDER, "y", hold=0.15, ramp=0.7),
        CurveEntry(R_SHOULDER, "y", hold=0.15, ramp=0.7),
        CurveEntry(L_SHOULDER, "x", hold=0.5, ramp=0.7),
        CurveEntry(R_SHOULDER, "x", hold=-0.5, ramp=0.7),
        CurveEntry(L_ELBOW, "y", hold=1.2, ramp=0.7),
        CurveEntry(R_ELBOW, "y", hold=1.2, ramp=0.7),
    ),
    "cross_arms": (
        CurveEntry(L_SHOULDER, "y", hold=-0.5, ramp=0.7),
        CurveEntry(R_SHOULDER, "y", hold=-0.5, ramp=0.7),
        CurveEntry(L_SHOULDER, "z", hold=-0.6, ramp=0.7),
        CurveEntry(R_SHOULDER, "z", hold=0.6, ramp=0.7),
        CurveEntry(L_ELBOW, "y", hold=1.25, ramp=0.7),
        CurveEntry(R_ELBOW, "y", hold=1.25, ramp=0.7),
    ),
    "guard_stance": (
        CurveEntry(L_SHOULDER, "y", hold=-0.8, ramp=0.5),
        CurveEntry(R_SHOULDER, "y", hold=-0.8, ramp=0.5),
        CurveEntry(L_SHOULDER, "x", hold=0.2, ramp=0.5),
        CurveEntry(R_SHOULDER, "x", hold=-0.2, ramp=0.5),
        CurveEntry(L_ELBOW, "y", hold=1.25, ramp=0.5),
        CurveEntry(R_ELBOW, "y", hold=1.25, ramp=0.5),
        CurveEntry(SPINE2, "y", hold=0.12, ramp=0.5),
    ),
    "beat_gesture": (
        CurveEntry(R_SHOULDER, "y", hold=-0.7, ramp=0.6),
        CurveEntry(R_ELBOW, "y", hold=0.9, ramp=0.6, osc_amp=0.35, osc_freq=0.9),
        CurveEntry(R_WRIST, "y", osc_amp=0.25, osc_freq=0.9),
    ),
    "strike": (
        CurveEntry(R_SHOULDER, "y", hold=-0.9, ramp=0.4),
        CurveEntry(R_ELBOW, "y", hold=0.7, ramp=0.4, osc_amp=0.5, osc_freq=1.2),
        CurveEntry(SPINE2, "z", hold=0.2, ramp=0.4),
    ),
}

OPENNESS_ROLL = 0.15  # outward shoulder-roll shift per unit openness

_MOTION_JOINTS = tuple(sorted({e.joint for curve in PRIMITIVE_CURVES.values() for e in curve}))
_AXIS_ORDER = "yxz"
_AXIS_VEC = {"x": np.array([1.0, 0, 0]), "y": np.array([0, 1.0, 0]), "z": np.array([0, 0, 1.0])}
_DEFAULT_APPROACH_RATE = 1.5  # rad/s, for zero-hold channels returning to rest


def _euler_yxz(rot: np.ndarray):
    """Angles (pitch, roll, yaw) such that rot = Ry(p) @ Rx(r) @ Rz(y).

    Valid while |roll| < pi/2, which the curve budgets guarantee.
    """
    r = math.asin(max(-1.0, min(1.0, -rot[1, 2])))
    p = math.atan2(rot[0, 2], rot[2, 2])
    y = math.atan2(rot[1, 0], rot[1, 1])
    return p, r, y


def _compose_yxz(pitch: float, roll: float, yaw: float) -> np.ndarray:
    rot = axis_angle_matrix(_AXIS_VEC["y"], pitch)
    if roll:
        rot = rot @ axis_angle_matrix(_AXIS_VEC["x"], roll)
    if yaw:
        rot = rot @ axis_angle_matrix(_AXIS_VEC["z"], yaw)
    return rot


def _recover_phase(r0: float, r1: float, delta: float) -> float:
    """Phase phi with r0 = A sin(phi), r1 = A sin(phi - delta); exact at
    steady state, merely bounded during transients."""
    s = math.sin(delta)
    if abs(s) < 1e-9:
        return math.pi / 2 if r0 >= 0 else -math.pi / 2
    return math.atan2(r0, (r0 * math.cos(delta) - r1) / s)


class ProceduralBackend:
    """Deterministic parametric generator over per-primitive angle curves.

    Stateless between calls: posture continues from the seed by rate-limited
    approach to the hold target, sinusoids continue with phase recovered
    from the seed's last two frames.  The first ceil(n/2) frames blend from
    the seed's last frame into the curve, so the window boundary jump is
    exactly zero.  Root translation is held at the seed's last root.
    """

    def __init__(self, vocabulary: Vocabulary | None = None):
        self.vocabulary = vocabulary if vocabulary is not None else Vocabulary.default()
        self.last_generate_fell_back = False

    def generate(self, display_text, style: StyleParams, seed: MotionClip, n: int, rng_seed: int = 0):
        if len(seed) == 0:
            raise PlannerError("seed clip must be nonempty")
        try:
            primitive = self.vocabulary.resolve(display_text)
        except UnknownPrimitiveError:
            primitive = None
        self.last_generate_fell_back = primitive is None
        curve_id = primitive.id if primitive is not None else "stand_still"
        entries = PRIMITIVE_CURVES[curve_id]

        dt = 1.0 / seed.fps
        seed_last = seed.frames[-1]
        seed_prev = seed.frames[-2] if len(seed) >= 2 else seed_last
        last_frame = decode_frame(seed_last)
        prev_frame = decode_frame(seed_prev)

        # Per-joint curve samples (pitch, roll, yaw).  Non-stand primitives
        # get every motion joint/axis filled in so channels the primitive
        # does not drive decay back to rest instead of freezing wherever the
        # seed left them.
        by_joint = {}
        for e in entries:
            by_joint.setdefault(e.joint, {})[e.axis] = e
        if entries:
            for joint in _MOTION_JOINTS:
                axes = by_joint.setdefault(joint, {})
                for axis in _AXIS_ORDER:
                    axes.setdefault(axis, CurveEntry(joint, axis))

        joint_angles = {}  # joint -> (n, 3) array of (pitch, roll, yaw)
        for joint, axes in by_joint.items():
            cur = _euler_yxz(last_frame.joint_matrix(joint))
            prev = _euler_yxz(prev_frame.joint_matrix(joint))
            samples = np.zeros((n, 3))
            for ai, axis in enumerate(_AXIS_ORDER):
                entry = axes[axis]
                target = entry.hold * style.amplitude_scale
                if axis == "x" and joint in (L_SHOULDER, R_SHOULDER):
                    sign = 1.0 if joint == L_SHOULDER else -1.0
                    target += sign * OPENNESS_ROLL * style.openness
                amp_osc = entry.osc_amp * style.amplitude_scale
                omega = 2.0 * math.pi * entry.osc_freq * style.tempo_scale
                if amp_osc > 0.0 and omega > 0.0:
                    delta = omega * dt
                    r0, r1 = cur[ai] - target, prev[ai] - target
                    phi = _recover_phase(r0, r1, delta)
                    posture0 = cur[ai] - amp_osc * math.sin(phi)
                    osc = amp_osc * np.sin(phi + delta * np.arange(1, n + 1))
                else:
                    posture0 = cur[ai]
                    osc = np.zeros(n)
                rate = abs(target) / entry.ramp if entry.hold != 0.0 else _DEFAULT_APPROACH_RATE
                gap = target - posture0
                travel = np.minimum(abs(gap), rate * dt * np.arange(1, n + 1))
                samples[:, ai] = posture0 + math.copysign(1.0, gap) * travel + osc if gap else target + osc
            joint_angles[joint] = samples

        base = stand_pose()
        curve = np.empty((n, FRAME_DIM))
        for k in range(n):
            rotations = base.rotations.copy()
            for joint, samples in joint_angles.items():
                rotations[joint] = matrix_to_sixd(_compose_yxz(*samples[k]))
            curve[k, :3] = last_frame.root
            curve[k, 3:] = rotations.reshape(-1)

        m = (n + 1) // 2
        out = curve.copy()
        for k in range(min(m, n)):
            w = k / m
            out[k] = seed_last + w * (curve[k] - seed_last)
        return out


# ---------------------------------------------------------------------------
# Remote backend

_TEMPO_QUALIFIERS = ((0.8, "slowly"), (1.2, None), (float("inf"), "energetically"))
_AMPLITUDE_QUALIFIERS = ((0.8, "slightly"), (1.2, None), (float("inf"), "widely"))


def style_qualifiers(style: StyleParams) -> str:
    """Text qualifiers for backends that accept only text + seed."""
    words = []
    for value, buckets in ((style.tempo_scale, _TEMPO_QUALIFIERS), (style.amplitude_scale, _AMPLITUDE_QUALIFIERS)):
        for limit, word in buckets:
            if value < limit or limit == float("inf"):
                if word:
                    words.append(word)
                break
    return " and ".join(words)


class RemoteBackend:
    """HTTP client for an external text-to-motion generator.

    POSTs {text, n, fps, seed_frames, rng_seed} and expects {frames} with n
    135-float rows.  Style is injected as qualifier words appended to the
    primitive text.
    """

    def __init__(self, endpoint: str, timeout: float = 10.0, client=None):
        self.endpoint = endpoint
        self.timeout = timeout
        self._client = client
        self.last_generate_fell_back = False

    def generate(self, display_text, style: StyleParams, seed: MotionClip, n: int, rng_seed: int = 0):
        qualifiers = style_qualifiers(style)
        text = f"{display_text}, {qualifiers}" if qualifiers else display_text
        payload = {
            "text": text,
            "n": n,
            "fps": seed.fps,
            "seed_frames": seed.frames.tolist(),
            "rng_seed": rng_seed,
        }
        if self._client is None:
            import httpx

            response = httpx.post(self.endpoint, json=payload, timeout=self.timeout)
        else:
            response = self._client.post(self.endpoint, json=payload, timeout=self.timeout)
        response.raise_for_status()
        frames = np.asarray(response.json()["frames"], dtype=np.float64)
        if frames.shape != (n, FRAME_DIM):
            raise BackendContractError(f"remote returned {frames.shape}, expected ({n}, {FRAME_DIM})")
        return frames


def make_backend(cfg: PlannerConfig, vocabulary=None, endpoint: str | None = None):
    if cfg.backend == "procedural":
        return ProceduralBackend(vocabulary)
    if not endpoint:
        raise PlannerError("remote backend requires an endpoint")
    return RemoteBackend(endpoint)


def rotation_magnitude(frames: np.ndarray, joint: int) -> np.ndarray:
    """Per-frame rotation angle (rad) of one joint, from encoded frames."""
    from .motion import sixd_to_matrix

    frames = np.asarray(frames, dtype=np.float64).reshape(-1, FRAME_DIM)
    coords = frames[:, 3 + joint * 6 : 3 + (joint + 1) * 6]
    mats = sixd_to_matrix(coords)
    traces = np.trace(mats, axis1=-2, axis2=-1)
    return np.arccos(np.clip((traces - 1.0) / 2.0, -1.0, 1.0))

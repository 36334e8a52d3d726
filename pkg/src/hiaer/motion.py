"""Motion representation core: 135-dim human pose frames at 12.5 FPS.

A frame is a root translation (3) plus 22 joint rotations in the continuous
6D representation (22 x 6), flat-encoded as a 135-vector.  Rotation math is
Gram-Schmidt based: any pair of non-degenerate 6D columns maps to a proper
rotation matrix, which makes the representation safe to interpolate.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

NUM_JOINTS = 22
FRAME_DIM = 3 + NUM_JOINTS * 6  # 135
DEFAULT_FPS = 12.5

# 6D coordinates of the identity rotation: first two basis columns.
IDENTITY_6D = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])

CLIP_MAGIC = b"HMC1"


class MotionError(Exception):
    """Base class for motion-representation failures."""


class MalformedFrameError(MotionError):
    """Frame vector has the wrong length or non-finite entries."""


class DegenerateRotationError(MotionError):
    """6D input with a zero first column or parallel columns."""


class InvalidRotationError(MotionError):
    """Matrix input is not orthonormal with determinant +1."""


class InsufficientFramesError(MotionError):
    """Clip too short for the requested window."""


def sixd_to_matrix(sixd: np.ndarray) -> np.ndarray:
    """Map 6D rotation coordinates to rotation matrices via Gram-Schmidt.

    Accepts shape (..., 6); returns (..., 3, 3) with columns [c1 c2 c3]
    where c1 = normalize(a), c2 = normalize(b - (c1.b)c1), c3 = c1 x c2.
    A second orthogonalization pass keeps near-parallel inputs (angle down
    to ~1e-6 rad) orthonormal well inside the 1e-9 contract.

    Raises DegenerateRotationError on zero or parallel columns.
    """
    sixd = np.asarray(sixd, dtype=np.float64)
    if sixd.shape[-1] != 6:
        raise DegenerateRotationError(f"expected trailing dim 6, got {sixd.shape}")
    if not np.all(np.isfinite(sixd)):
        raise DegenerateRotationError("non-finite 6D input")
    a = sixd[..., :3]
    b = sixd[..., 3:]

    # scale each column out by its largest component first: squaring
    # underflows below ~1e-154 and overflows above ~1e154, both well inside
    # the advertised scale invariance
    amax = np.max(np.abs(a), axis=-1, keepdims=True)
    bmax = np.max(np.abs(b), axis=-1, keepdims=True)
    if np.any(amax == 0.0) or np.any(bmax == 0.0):
        raise DegenerateRotationError("zero column in 6D input")
    a = a / amax
    b = b / bmax

    na = np.linalg.norm(a, axis=-1, keepdims=True)
    nb = np.linalg.norm(b, axis=-1, keepdims=True)
    c1 = a / na

    b_perp = b - np.sum(c1 * b, axis=-1, keepdims=True) * c1
    nperp = np.linalg.norm(b_perp, axis=-1, keepdims=True)
    # Relative threshold: genuinely parallel inputs, not merely close.
    if np.any(nperp <= 1e-12 * nb):
        raise DegenerateRotationError("parallel columns in 6D input")
    c2 = b_perp / nperp
    # Re-orthogonalize once; the first projection loses precision when the
    # angle between a and b is tiny.
    c2 = c2 - np.sum(c1 * c2, axis=-1, keepdims=True) * c1
    c2 = c2 / np.linalg.norm(c2, axis=-1, keepdims=True)
    c3 = np.cross(c1, c2)
    return np.stack([c1, c2, c3], axis=-1)


def matrix_to_sixd(matrix: np.ndarray, atol: float = 1e-9) -> np.ndarray:
    """Extract 6D coordinates (first two columns) from rotation matrices.

    Raises InvalidRotationError unless R^T R = I and det R = +1 within atol.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape[-2:] != (3, 3):
        raise InvalidRotationError(f"expected trailing shape (3, 3), got {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise InvalidRotationError("non-finite matrix input")
    gram = np.swapaxes(matrix, -1, -2) @ matrix
    eye = np.eye(3)
    if np.max(np.abs(gram - eye)) > atol:
        raise InvalidRotationError("matrix is not orthonormal")
    if np.max(np.abs(np.linalg.det(matrix) - 1.0)) > atol:
        raise InvalidRotationError("matrix determinant is not +1")
    return np.concatenate([matrix[..., :, 0], matrix[..., :, 1]], axis=-1)


def axis_angle_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation matrix about a (normalized) axis by angle, Rodrigues form."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    x, y, z = axis
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


@dataclass(frozen=True, eq=False)
class SmplFrame:
    """One human pose: root translation in meters + 22 joint 6D rotations."""

    root: np.ndarray  # (3,)
    rotations: np.ndarray  # (22, 6)

    def __post_init__(self):
        root = np.asarray(self.root, dtype=np.float64).reshape(3)
        rot = np.asarray(self.rotations, dtype=np.float64).reshape(NUM_JOINTS, 6)
        if not (np.all(np.isfinite(root)) and np.all(np.isfinite(rot))):
            raise MalformedFrameError("non-finite frame values")
        object.__setattr__(self, "root", root)
        object.__setattr__(self, "rotations", rot)

    def __eq__(self, other):
        if not isinstance(other, SmplFrame):
            return NotImplemented
        return np.array_equal(self.root, other.root) and np.array_equal(
            self.rotations, other.rotations
        )

    def joint_matrix(self, joint: int) -> np.ndarray:
        return sixd_to_matrix(self.rotations[joint])


def stand_pose() -> SmplFrame:
    """The canonical stand: zero root, identity rotation on every joint."""
    return SmplFrame(np.zeros(3), np.tile(IDENTITY_6D, (NUM_JOINTS, 1)))


def encode_frame(frame: SmplFrame) -> np.ndarray:
    """Flatten to the 135-vector layout [root(3), joint0(6), ..., joint21(6)]."""
    return np.concatenate([frame.root, frame.rotations.ravel()])


def decode_frame(vec: np.ndarray) -> SmplFrame:
    """Inverse of encode_frame; rejects wrong length or non-finite entries."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (FRAME_DIM,):
        raise MalformedFrameError(f"expected {FRAME_DIM} values, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise MalformedFrameError("non-finite frame values")
    return SmplFrame(vec[:3], vec[3:].reshape(NUM_JOINTS, 6))


@dataclass
class MotionClip:
    """An ordered run of frames at a fixed frame rate.

    Frames are stored row-wise in their 135-dim flat encoding; use frame(i)
    to get a structured view.
    """

    frames: np.ndarray  # (n, 135) float64
    fps: float = DEFAULT_FPS
    label: str = ""

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim == 1:
            frames = frames.reshape(1, -1)
        if frames.ndim != 2 or frames.shape[1] != FRAME_DIM:
            raise MalformedFrameError(f"clip frames must be (n, {FRAME_DIM}), got {frames.shape}")
        if frames.size and not np.all(np.isfinite(frames)):
            raise MalformedFrameError("non-finite clip values")
        if self.fps <= 0:
            raise MotionError("fps must be positive")
        self.frames = frames

    @classmethod
    def from_frames(cls, frames, fps: float = DEFAULT_FPS, label: str = "") -> "MotionClip":
        rows = [encode_frame(f) if isinstance(f, SmplFrame) else np.asarray(f) for f in frames]
        data = np.stack(rows) if rows else np.empty((0, FRAME_DIM))
        return cls(data, fps=fps, label=label)

    def __len__(self) -> int:
        return self.frames.shape[0]

    def frame(self, i: int) -> SmplFrame:
        return decode_frame(self.frames[i])

    @property
    def duration(self) -> float:
        return len(self) / self.fps

    def append(self, frames: np.ndarray) -> "MotionClip":
        frames = np.asarray(frames, dtype=np.float64).reshape(-1, FRAME_DIM)
        return MotionClip(np.vstack([self.frames, frames]), fps=self.fps, label=self.label)


def stand_clip(n_frames: int, fps: float = DEFAULT_FPS, label: str = "stand") -> MotionClip:
    vec = encode_frame(stand_pose())
    return MotionClip(np.tile(vec, (n_frames, 1)), fps=fps, label=label)


def seed_window(clip: MotionClip, n: int) -> MotionClip:
    """Last n frames of a clip, order preserved, fps/label carried."""
    if n < 1 or len(clip) < n:
        raise InsufficientFramesError(f"need {n} frames, clip has {len(clip)}")
    return MotionClip(clip.frames[len(clip) - n :].copy(), fps=clip.fps, label=clip.label)


def write_clip(path, clip: MotionClip) -> None:
    """Binary clip format: magic, fps (f32), count (u32), label, f32 frames."""
    label = clip.label.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CLIP_MAGIC)
        fh.write(struct.pack("<fI", clip.fps, len(clip)))
        fh.write(struct.pack("<I", len(label)))
        fh.write(label)
        fh.write(clip.frames.astype("<f4").tobytes())


def read_clip(path) -> MotionClip:
    data = Path(path).read_bytes()
    if data[:4] != CLIP_MAGIC:
        raise MotionError(f"bad clip magic {data[:4]!r}")
    fps, count = struct.unpack_from("<fI", data, 4)
    (label_len,) = struct.unpack_from("<I", data, 12)
    label = data[16 : 16 + label_len].decode("utf-8")
    body = data[16 + label_len :]
    expected = count * FRAME_DIM * 4
    if len(body) < expected:
        raise MotionError("truncated clip file")
    frames = np.frombuffer(body[:expected], dtype="<f4").reshape(count, FRAME_DIM)
    return MotionClip(frames.astype(np.float64), fps=float(fps), label=label)


def write_clip_json(path, clip: MotionClip) -> None:
    doc = {
        "magic": CLIP_MAGIC.decode(),
        "fps": clip.fps,
        "label": clip.label,
        "frames": clip.frames.tolist(),
    }
    Path(path).write_text(json.dumps(doc))


def read_clip_json(path) -> MotionClip:
    doc = json.loads(Path(path).read_text())
    if doc.get("magic") != CLIP_MAGIC.decode():
        raise MotionError("bad clip magic")
    return MotionClip(np.asarray(doc["frames"], dtype=np.float64), fps=doc["fps"], label=doc.get("label", ""))

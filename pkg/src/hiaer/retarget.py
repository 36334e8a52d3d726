"""Frame-wise neural retargeting from 135-dim human frames to 29 robot joints.

The mapping network is a dense 135-512-512-29 MLP with rectified-linear
hidden units, trained by mini-batch SGD on mean squared error over the
unclamped outputs; per-joint limit clamping is a deployment layer applied
at the output.  Also hosts the robot descriptor with wrist forward
kinematics and the workspace balance resampler used to de-skew training
data.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .motion import FRAME_DIM, MotionClip, SmplFrame, axis_angle_matrix, encode_frame

NUM_ROBOT_JOINTS = 29
LAYER_DIMS = (FRAME_DIM, 512, 512, NUM_ROBOT_JOINTS)
WEIGHTS_MAGIC = b"RTG1"
ACTIVATION_TAGS = {"relu": 0}


class RetargetError(Exception):
    pass


class NumericFaultError(RetargetError):
    """Non-finite values inside the network; weights are corrupt."""


class DivergenceError(RetargetError):
    """Training loss became non-finite; try a smaller learning rate."""


class EmptyInputError(RetargetError):
    pass


@dataclass(frozen=True)
class RobotJoint:
    name: str
    lower: float
    upper: float
    default: float = 0.0

    def __post_init__(self):
        if not self.lower < self.upper:
            raise RetargetError(f"joint {self.name}: lower must be < upper")


@dataclass(frozen=True)
class ChainElement:
    """One arm-chain link: rotate about `axis` by the joint's angle, after
    translating by `offset` in the parent frame."""

    joint: int
    axis: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "axis", np.asarray(self.axis, dtype=np.float64).reshape(3))
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=np.float64).reshape(3))


class RobotDescriptor:
    """29-joint descriptor: names, limits, defaults, and per-arm wrist chains."""

    def __init__(self, joints, arm_chains):
        if len(joints) != NUM_ROBOT_JOINTS:
            raise RetargetError(f"descriptor needs {NUM_ROBOT_JOINTS} joints, got {len(joints)}")
        self.joints = list(joints)
        self.arm_chains = {side: list(chain) for side, chain in arm_chains.items()}
        for side, chain in self.arm_chains.items():
            for el in chain:
                if not 0 <= el.joint < NUM_ROBOT_JOINTS:
                    raise RetargetError(f"{side} chain references joint {el.joint}")
        self.lower = np.array([j.lower for j in self.joints])
        self.upper = np.array([j.upper for j in self.joints])
        self.defaults = np.array([j.default for j in self.joints])
        self.name_index = {j.name: i for i, j in enumerate(self.joints)}

    @classmethod
    def from_file(cls, path) -> "RobotDescriptor":
        return cls._from_doc(json.loads(Path(path).read_text()))

    @classmethod
    def default(cls) -> "RobotDescriptor":
        text = resources.files("hiaer.data").joinpath("robot_descriptor.json").read_text()
        return cls._from_doc(json.loads(text))

    @classmethod
    def _from_doc(cls, doc) -> "RobotDescriptor":
        joints = [
            RobotJoint(j["name"], j["lower"], j["upper"], j.get("default", 0.0))
            for j in doc["joints"]
        ]
        chains = {
            side: [ChainElement(e["joint"], e["axis"], e["offset"]) for e in chain]
            for side, chain in doc["arm_chains"].items()
        }
        return cls(joints, chains)

    def clamp(self, angles: np.ndarray) -> np.ndarray:
        return np.clip(angles, self.lower, self.upper)

    def chain_length(self, side: str) -> float:
        return float(sum(np.linalg.norm(el.offset) for el in self.arm_chains[side]))


@dataclass
class RobotTrajectory:
    """Ordered robot poses (n, 29) at a fixed frame rate."""

    angles: np.ndarray
    fps: float = 12.5
    label: str = ""

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=np.float64)
        if angles.ndim == 1:
            angles = angles.reshape(1, -1)
        if angles.ndim != 2 or angles.shape[1] != NUM_ROBOT_JOINTS:
            raise RetargetError(f"trajectory must be (n, {NUM_ROBOT_JOINTS}), got {angles.shape}")
        self.angles = angles

    def __len__(self) -> int:
        return self.angles.shape[0]


@dataclass
class TrainingPair:
    input: np.ndarray  # 135-vector or SmplFrame
    target: np.ndarray  # 29 joint angles

    def __post_init__(self):
        vec = encode_frame(self.input) if isinstance(self.input, SmplFrame) else np.asarray(self.input, dtype=np.float64)
        if vec.shape != (FRAME_DIM,):
            raise RetargetError(f"pair input must be a {FRAME_DIM}-vector")
        target = np.asarray(self.target, dtype=np.float64).reshape(NUM_ROBOT_JOINTS)
        self.input = vec
        self.target = target


@dataclass
class RetargetNetwork:
    """Dense 135-512-512-29 network, rectified-linear hidden, identity output."""

    weights: list  # [(512,135), (512,512), (29,512)]
    biases: list  # [(512,), (512,), (29,)]
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATION_TAGS:
            raise RetargetError(f"unsupported activation {self.activation!r}")
        expected = [(LAYER_DIMS[i + 1], LAYER_DIMS[i]) for i in range(3)]
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != expected[i] or b.shape != (expected[i][0],):
                raise RetargetError(
                    f"layer {i}: expected {expected[i]} / ({expected[i][0]},), got {w.shape} / {b.shape}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise RetargetError(f"layer {i} has non-finite parameters")

    @classmethod
    def zeros(cls) -> "RetargetNetwork":
        return cls(
            [np.zeros((LAYER_DIMS[i + 1], LAYER_DIMS[i])) for i in range(3)],
            [np.zeros(LAYER_DIMS[i + 1]) for i in range(3)],
        )

    @classmethod
    def initialized(cls, rng: np.random.Generator) -> "RetargetNetwork":
        weights, biases = [], []
        for i in range(3):
            fan_in = LAYER_DIMS[i]
            scale = np.sqrt(2.0 / fan_in)
            weights.append(rng.normal(0.0, scale, size=(LAYER_DIMS[i + 1], fan_in)))
            biases.append(np.zeros(LAYER_DIMS[i + 1]))
        return cls(weights, biases)


def forward_raw(net: RetargetNetwork, x: np.ndarray) -> np.ndarray:
    """Unclamped forward pass; accepts (135,) or (n, 135)."""
    x = np.asarray(x, dtype=np.float64)
    h = x @ net.weights[0].T + net.biases[0]
    np.maximum(h, 0.0, out=h)
    h = h @ net.weights[1].T + net.biases[1]
    np.maximum(h, 0.0, out=h)
    out = h @ net.weights[2].T + net.biases[2]
    if not np.all(np.isfinite(out)):
        raise NumericFaultError("non-finite network output")
    return out


def forward(net: RetargetNetwork, frame, desc: RobotDescriptor) -> np.ndarray:
    """Map one human frame to 29 joint angles, clamped to descriptor limits."""
    vec = encode_frame(frame) if isinstance(frame, SmplFrame) else np.asarray(frame, dtype=np.float64)
    if vec.shape != (FRAME_DIM,):
        raise RetargetError(f"frame must be a {FRAME_DIM}-vector, got {vec.shape}")
    return desc.clamp(forward_raw(net, vec))


def retarget_clip(net: RetargetNetwork, clip: MotionClip, desc: RobotDescriptor) -> RobotTrajectory:
    """Frame-wise retargeting of a whole clip; order and fps preserved."""
    if len(clip) == 0:
        raise EmptyInputError("cannot retarget an empty clip")
    raw = forward_raw(net, clip.frames)
    return RobotTrajectory(desc.clamp(raw), fps=clip.fps, label=clip.label)


def train(
    pairs,
    epochs: int = 200,
    learning_rate: float = 0.01,
    rng_seed: int = 0,
    batch_size: int = 32,
):
    """Fit the network by mini-batch SGD on MSE over unclamped outputs.

    Returns (network, loss_history) where loss_history holds one mean MSE
    per epoch.  Deterministic for a fixed rng_seed.
    """
    pairs = list(pairs)
    if not pairs:
        raise EmptyInputError("no training pairs")
    X = np.stack([p.input for p in pairs])
    T = np.stack([p.target for p in pairs])
    rng = np.random.default_rng(rng_seed)
    net = RetargetNetwork.initialized(rng)
    n = X.shape[0]
    losses = []
    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            xb, tb = X[idx], T[idx]
            m = xb.shape[0]

            z1 = xb @ net.weights[0].T + net.biases[0]
            a1 = np.maximum(z1, 0.0)
            z2 = a1 @ net.weights[1].T + net.biases[1]
            a2 = np.maximum(z2, 0.0)
            y = a2 @ net.weights[2].T + net.biases[2]

            err = y - tb
            loss = float(np.mean(err**2))
            if not np.isfinite(loss):
                raise DivergenceError("training diverged; try a smaller learning_rate")
            epoch_loss += loss * m

            # MSE averaged over batch and output dims.
            g_y = 2.0 * err / (m * NUM_ROBOT_JOINTS)
            g_w3 = g_y.T @ a2
            g_b3 = g_y.sum(axis=0)
            g_a2 = g_y @ net.weights[2]
            g_z2 = g_a2 * (z2 > 0)
            g_w2 = g_z2.T @ a1
            g_b2 = g_z2.sum(axis=0)
            g_a1 = g_z2 @ net.weights[1]
            g_z1 = g_a1 * (z1 > 0)
            g_w1 = g_z1.T @ xb
            g_b1 = g_z1.sum(axis=0)

            net.weights[2] -= learning_rate * g_w3
            net.biases[2] -= learning_rate * g_b3
            net.weights[1] -= learning_rate * g_w2
            net.biases[1] -= learning_rate * g_b2
            net.weights[0] -= learning_rate * g_w1
            net.biases[0] -= learning_rate * g_b1
        losses.append(epoch_loss / n)
    return net, losses


def fk_wrist(pose: np.ndarray, desc: RobotDescriptor):
    """Wrist positions (left, right) in meters from the torso base frame.

    Walks each arm chain: translate by the link offset in the accumulated
    frame, then rotate the frame about the element's axis by the joint
    angle.  Pure function of (pose, descriptor).
    """
    pose = np.asarray(pose, dtype=np.float64).reshape(NUM_ROBOT_JOINTS)
    out = []
    for side in ("left", "right"):
        p = np.zeros(3)
        rot = np.eye(3)
        for el in desc.arm_chains[side]:
            p = p + rot @ el.offset
            rot = rot @ axis_angle_matrix(el.axis, pose[el.joint])
        out.append(p)
    return out[0], out[1]


def fk_wrist_batch(angles: np.ndarray, desc: RobotDescriptor, side: str = "right") -> np.ndarray:
    """Vectorized single-wrist FK over (n, 29) angle rows."""
    angles = np.asarray(angles, dtype=np.float64)
    n = angles.shape[0]
    p = np.zeros((n, 3))
    rot = np.tile(np.eye(3), (n, 1, 1))
    for el in desc.arm_chains[side]:
        p = p + np.einsum("nij,j->ni", rot, el.offset)
        theta = angles[:, el.joint]
        axis = el.axis / np.linalg.norm(el.axis)
        x, y, z = axis
        k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
        k2 = k @ k
        local = (
            np.eye(3)[None, :, :]
            + np.sin(theta)[:, None, None] * k[None, :, :]
            + (1.0 - np.cos(theta))[:, None, None] * k2[None, :, :]
        )
        rot = rot @ local
    return p


@dataclass
class WorkspaceGrid:
    """Axis-aligned 3D box partitioned into resolution^3 cells."""

    bounds: np.ndarray = field(
        default_factory=lambda: np.array([[-0.7, 0.7], [-0.7, 0.7], [-0.3, 0.9]])
    )
    resolution: int = 8

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=np.float64).reshape(3, 2)
        if np.any(self.bounds[:, 1] <= self.bounds[:, 0]) or self.resolution < 1:
            raise RetargetError("degenerate workspace grid")

    def cell_of(self, points: np.ndarray) -> np.ndarray:
        """Flat cell index per point; coordinates outside the box land in edge cells."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        span = self.bounds[:, 1] - self.bounds[:, 0]
        frac = (points - self.bounds[:, 0]) / span
        ijk = np.clip((frac * self.resolution).astype(int), 0, self.resolution - 1)
        return (ijk[:, 0] * self.resolution + ijk[:, 1]) * self.resolution + ijk[:, 2]


@dataclass
class ResampleReport:
    frames: np.ndarray  # (target_size, 29)
    before_counts: dict  # flat cell index -> count
    after_counts: dict
    cv_before: float
    cv_after: float
    degenerate: bool = False


def _occupancy_cv(counts: dict) -> float:
    vals = np.array([c for c in counts.values() if c > 0], dtype=np.float64)
    if vals.size == 0:
        return 0.0
    mean = vals.mean()
    return float(vals.std() / mean) if mean > 0 else 0.0


def resample_balanced(
    dataset,
    grid: WorkspaceGrid,
    target_size: int,
    rng_seed: int = 0,
    wrist: str = "right",
) -> ResampleReport:
    """Inverse-occupancy resampling toward uniform wrist workspace coverage.

    Bins every frame by its wrist cell, weights each frame by 1/occupancy of
    its cell, and draws target_size frames with replacement.  Empty cells
    stay empty; a single-occupied-cell input degenerates to a uniform draw
    (reported, with a warning).
    """
    trajectories = [dataset] if isinstance(dataset, RobotTrajectory) else list(dataset)
    if not trajectories:
        raise EmptyInputError("empty dataset")
    angles = np.vstack([t.angles for t in trajectories])
    if wrist == "both":
        pts = np.vstack([fk_wrist_batch(angles, RobotDescriptor.default(), s) for s in ("left", "right")])
        cells = grid.cell_of(pts)
        # Pair each frame with its right-wrist cell for weighting; both-wrist
        # occupancy is informational.
        frame_cells = cells[angles.shape[0] :]
    else:
        pts = fk_wrist_batch(angles, RobotDescriptor.default(), wrist)
        cells = grid.cell_of(pts)
        frame_cells = cells

    unique, counts = np.unique(frame_cells, return_counts=True)
    occupancy = dict(zip(unique.tolist(), counts.tolist()))
    degenerate = len(unique) == 1
    if degenerate:
        warnings.warn("all frames fall in one workspace cell; resampling uniformly", stacklevel=2)
        weights = np.full(angles.shape[0], 1.0 / angles.shape[0])
    else:
        cell_count = dict(zip(unique, counts))
        weights = np.array([1.0 / cell_count[c] for c in frame_cells], dtype=np.float64)
        weights /= weights.sum()

    rng = np.random.default_rng(rng_seed)
    picks = rng.choice(angles.shape[0], size=target_size, replace=True, p=weights)
    resampled = angles[picks]

    after_cells = frame_cells[picks]
    au, ac = np.unique(after_cells, return_counts=True)
    after = dict(zip(au.tolist(), ac.tolist()))
    return ResampleReport(
        frames=resampled,
        before_counts=occupancy,
        after_counts=after,
        cv_before=_occupancy_cv(occupancy),
        cv_after=_occupancy_cv(after),
        degenerate=degenerate,
    )


def save_weights(path, net: RetargetNetwork) -> None:
    """Binary weights: magic, activation tag, layer count, then per layer
    rows/cols (u32) + row-major f32 weights + f32 biases."""
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(struct.pack("<BB", ACTIVATION_TAGS[net.activation], len(net.weights)))
        for w, b in zip(net.weights, net.biases):
            fh.write(struct.pack("<II", w.shape[0], w.shape[1]))
            fh.write(w.astype("<f4").tobytes())
            fh.write(b.astype("<f4").tobytes())


def load_weights(path) -> RetargetNetwork:
    data = Path(path).read_bytes()
    if data[:4] != WEIGHTS_MAGIC:
        raise RetargetError(f"bad weights magic {data[:4]!r}")
    tag, layer_count = struct.unpack_from("<BB", data, 4)
    activation = {v: k for k, v in ACTIVATION_TAGS.items()}.get(tag)
    if activation is None:
        raise RetargetError(f"unknown activation tag {tag}")
    offset = 6
    weights, biases = [], []
    for _ in range(layer_count):
        rows, cols = struct.unpack_from("<II", data, offset)
        offset += 8
        w = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=offset).reshape(rows, cols)
        offset += rows * cols * 4
        b = np.frombuffer(data, dtype="<f4", count=rows, offset=offset)
        offset += rows * 4
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    return RetargetNetwork(weights, biases, activation=activation)


def load_reference_network() -> RetargetNetwork:
    """The bundled reference weights (trained on the synthetic pair set)."""
    path = resources.files("hiaer.data").joinpath("weights/reference_retarget.rtg1")
    with resources.as_file(path) as p:
        return load_weights(p)


# Scripted reference mapping used to synthesize desk-scale training data:
# projects each relevant human joint rotation onto a robot axis.  The map is
# (human joint index, projection axis, robot joint index, scale).
_REFERENCE_MAP = (
    (16, (0, 1, 0), 15, 1.0),  # left shoulder pitch
    (16, (1, 0, 0), 16, 1.0),  # left shoulder roll
    (16, (0, 0, 1), 17, 1.0),  # left shoulder yaw
    (18, (0, 1, 0), 18, 1.0),  # left elbow
    (20, (1, 0, 0), 19, 1.0),  # left wrist roll
    (20, (0, 1, 0), 20, 1.0),  # left wrist pitch
    (20, (0, 0, 1), 21, 1.0),  # left wrist yaw
    (17, (0, 1, 0), 22, 1.0),  # right shoulder pitch
    (17, (1, 0, 0), 23, 1.0),  # right shoulder roll
    (17, (0, 0, 1), 24, 1.0),  # right shoulder yaw
    (19, (0, 1, 0), 25, 1.0),  # right elbow
    (21, (1, 0, 0), 26, 1.0),  # right wrist roll
    (21, (0, 1, 0), 27, 1.0),  # right wrist pitch
    (21, (0, 0, 1), 28, 1.0),  # right wrist yaw
    (6, (0, 0, 1), 12, 1.0),  # spine2 -> waist yaw
    (6, (1, 0, 0), 13, 1.0),  # spine2 -> waist roll
    (6, (0, 1, 0), 14, 1.0),  # spine2 -> waist pitch
)


def reference_pose_map(frame, desc: RobotDescriptor) -> np.ndarray:
    """Scripted human-to-robot reference mapping for synthetic training data.

    For each mapped human joint, the signed rotation angle projected on the
    given axis (via the skew-symmetric part of its rotation matrix) drives
    the corresponding robot joint; everything else sits at the descriptor
    default.  Exact for single-axis rotations, which is what the procedural
    clips produce.
    """
    from .motion import decode_frame, sixd_to_matrix

    if not isinstance(frame, SmplFrame):
        frame = decode_frame(np.asarray(frame, dtype=np.float64))
    target = desc.defaults.copy()
    for human_joint, axis, robot_joint, scale in _REFERENCE_MAP:
        rot = sixd_to_matrix(frame.rotations[human_joint])
        vee = 0.5 * np.array([rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]])
        sin_theta = float(np.dot(np.asarray(axis, dtype=np.float64), vee))
        cos_theta = 0.5 * (np.trace(rot) - 1.0)
        target[robot_joint] += scale * float(np.arctan2(sin_theta, max(min(cos_theta, 1.0), -1.0)))
    return desc.clamp(target)
